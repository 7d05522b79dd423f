#ifndef ICAHOC_TOOLS_CLI_APP_HPP
#define ICAHOC_TOOLS_CLI_APP_HPP

// Subcommand driver for the icahoc tool. Each stage reads upstream artifacts
// from the cache directory and writes its own artifacts there or to the
// output directory. Kept in a header so tests can run it in-process.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "icahoc/icahoc.hpp"

namespace icahoc::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// "0,3,5-8" -> {0, 3, 5, 6, 7, 8}
template <typename T = std::size_t>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  const auto parse_one = [&](std::string_view s) {
    auto v = detail::parse_integer<std::uint64_t>(s);
    if (!v) throw CLI::ValidationError(what, "bad list entry '" + std::string(s) + "'");
    return static_cast<T>(*v);
  };
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(parse_one(item));
      continue;
    }
    const auto lo = parse_one(std::string_view(item).substr(0, dash));
    const auto hi = parse_one(std::string_view(item).substr(dash + 1));
    if (hi < lo) throw CLI::ValidationError(what, "descending range '" + item + "'");
    for (T v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw CLI::ValidationError(what, "empty list");
  return out;
}

inline std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Everything a stage needs to know about where it is running and how to
/// label what it writes.
struct Stage {
  std::string command;
  fs::path cache;
  fs::path out;
  std::string config_hash;
  std::vector<std::pair<std::string, std::uint64_t>> seeds;
  std::ostream* log = &std::cerr;
  std::ostream* report = &std::cout;

  std::vector<std::string> provenance_lines() const {
    std::vector<std::string> lines{"tool: icahoc " + std::string(ICAHOC_VERSION), "command: " + command,
                                   "config-hash: " + config_hash};
    std::string s = "seeds:";
    if (seeds.empty()) s += " none";
    for (const auto& [name, v] : seeds) s += " " + name + "=" + std::to_string(v);
    lines.push_back(s);
    return lines;
  }

  nlohmann::json provenance_json() const {
    nlohmann::json seeds_json = nlohmann::json::object();
    for (const auto& [name, v] : seeds) seeds_json[name] = v;
    return {{"tool", "icahoc"}, {"version", ICAHOC_VERSION}, {"command", command}, {"config_hash", config_hash},
            {"seeds", seeds_json}};
  }

  /// Header comment block with the given prefix ("#" or "//").
  std::string header(const std::string& prefix, const std::vector<std::string>& notes) const {
    std::string text;
    for (const auto& line : provenance_lines()) text += prefix + " " + line + "\n";
    for (const auto& line : notes) text += prefix + " " + line + "\n";
    return text;
  }

  void warn(const std::string& msg) const { *log << "warning: " << msg << '\n'; }

  fs::path require(const std::string& file, const std::string& producer) const {
    const auto p = cache / file;
    if (!fs::exists(p)) throw DataError("missing " + p.string() + ": run '" + producer + "' first");
    return p;
  }

  std::ofstream open_out(const fs::path& p, bool binary = false) const {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, binary ? std::ios::binary : std::ios::out);
    if (!f) throw DataError("cannot write " + p.string());
    return f;
  }

  void write_text(const fs::path& p, const std::string& content) const {
    auto f = open_out(p, true);
    f << content;
    if (!f) throw DataError("write failed: " + p.string());
  }

  /// Binary caches carry their provenance in a JSON sidecar.
  template <typename F>
  void write_cache(const std::string& file, F&& writer) const {
    const auto p = cache / file;
    {
      auto f = open_out(p, true);
      writer(f);
      if (!f) throw DataError("write failed: " + p.string());
    }
    write_text(cache / (p.stem().string() + ".prov.json"), provenance_json().dump(2) + "\n");
  }
};

template <typename F>
auto read_cache(const fs::path& p, F&& reader) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot open " + p.string());
  return reader(in);
}

// Upstream artifact loaders.

inline EmbeddingMatrix load_embeddings(const Stage& st) {
  return read_cache(st.require("embeddings.bin", "ingest"), [](std::istream& in) { return load_cache(in); });
}

inline WhiteningModel load_whitening_model(const Stage& st) {
  return read_cache(st.require("whitening.bin", "whiten"), [](std::istream& in) { return load_whitening(in); });
}

struct Components {
  EmbeddingMatrix emb;
  IcaResult ica;
  Eigen::MatrixXd s;  // display order, canonical signs
};

inline Components load_components(const Stage& st) {
  Components c;
  c.emb = load_embeddings(st);
  const auto wm = load_whitening_model(st);
  const auto z = apply_whitening(wm, c.emb.vectors);
  c.ica = read_cache(st.require("ica.bin", "ica"), [&](std::istream& in) { return load_ica(in, z); });
  c.s = c.ica.display_components();
  return c;
}

inline HocMatrix load_hoc_matrix(const Stage& st) {
  return read_cache(st.require("hoc.bin", "hoc"), [](std::istream& in) { return load_hoc(in); });
}

inline nlohmann::json load_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(p.string() + ": " + e.what());
  }
}

inline std::vector<std::size_t> load_sigma(const Stage& st) {
  return load_json(st.require("intrusion.json", "intrusion")).at("sigma").get<std::vector<std::size_t>>();
}

inline SpanningTree load_tree(const Stage& st) {
  const auto j = load_json(st.require("mst.json", "mst"));
  SpanningTree t;
  t.nodes = j.at("nodes").get<std::vector<std::size_t>>();
  for (const auto& e : j.at("edges")) t.edges.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), e.at(2).get<double>()});
  return t;
}

inline void check_axes(const std::vector<std::size_t>& axes, std::size_t d) {
  for (auto a : axes)
    if (a >= d) throw DataError("axis " + std::to_string(a) + " out of range (d=" + std::to_string(d) + ")");
}

inline std::string top_label(const Components& c, std::size_t axis, std::uint64_t min_freq) {
  auto words = top_words(c.s, c.emb.vocab, c.emb.counts, axis, 1, min_freq).words;
  if (words.empty()) words = top_words(c.s, c.emb.vocab, c.emb.counts, axis, 1, 0).words;
  return words.front();
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

inline std::vector<SimilarityDataset> load_datasets(const std::string& list) {
  std::vector<SimilarityDataset> out;
  for (const auto& path : split_commas(list)) out.push_back(load_similarity_dataset(path));
  if (out.empty()) throw DataError("no similarity datasets given");
  return out;
}

/// Parsed options for every subcommand; one flat bag keeps the wiring short.
struct Options {
  std::string config;
  std::string cache_dir = "cache";
  std::string out_dir = "out";
  std::uint64_t seed = 0;

  // ingest
  std::string embeddings;
  std::string frequencies;
  bool strict_freq = false;
  // whiten
  std::size_t dim = 0;
  double eps = 1e-10;
  // ica
  std::string nonlinearity = "logcosh";
  double alpha = 1.0;
  int max_iter = 200;
  double tol = 1e-4;
  // analysis
  std::string axes;
  std::string pairs;
  std::size_t top_pairs = 5;
  std::size_t k = 5;
  std::uint64_t min_freq = 100;
  bool log_counts = false;
  std::size_t bins = 50;
  double lo = 0.0;
  double hi = 5.0;
  bool include_diag = false;
  // intrusion
  std::size_t intruders = 100;
  double low_q = 0.5;
  double high_q = 0.1;
  bool filter_pool = false;
  bool normalize_rows = false;
  // graph
  std::size_t nodes = 150;
  std::string order = "sigma";
  std::size_t clusters = 10;
  std::size_t root = 0;
  std::size_t radius = 2;
  // reduction
  std::string datasets;
  std::string dims = "2,5,10,20";
  std::string seeds = "0-9";
  // judge
  std::string ks = "1-5";
  std::size_t components = 100;
  std::size_t list_size = 5;
  double bottom_fraction = 0.3;
  std::string rank_by = "abs";
  bool fixed_lines = false;
  std::string mode = "clusters";
  std::string word_clusters;
  std::string responses;
};

// Stage implementations.

inline void cmd_ingest(const Options& o, Stage& st) {
  auto m = load_word2vec_text(o.embeddings);
  std::size_t missing = m.rows();
  if (!o.frequencies.empty()) {
    const auto table = load_frequencies(o.frequencies);
    if (table.duplicate_warnings) st.warn(std::to_string(table.duplicate_warnings) + " duplicate frequency entries; last one kept");
    missing = attach_frequencies(m, table, o.strict_freq);
  } else {
    m.counts.assign(m.rows(), 0);
  }
  if (missing > 0) st.warn(std::to_string(missing) + " words have no frequency entry; counted as 0");
  st.write_cache("embeddings.bin", [&](std::ostream& f) { save_cache(m, f); });
  *st.report << "ingested " << m.rows() << " words, " << m.cols() << " dimensions\n";
}

inline void cmd_whiten(const Options& o, Stage& st) {
  const auto emb = load_embeddings(st);
  const auto wm = fit_whitening(emb.vectors, o.dim ? std::optional<std::size_t>(o.dim) : std::nullopt, o.eps);
  for (const auto& w : wm.warnings) st.warn(w);
  st.write_cache("whitening.bin", [&](std::ostream& f) { save_whitening(wm, f); });
  *st.report << "whitened " << wm.input_dim() << " -> " << wm.output_dim() << " dimensions\n";
}

inline void cmd_ica(const Options& o, Stage& st) {
  const auto emb = load_embeddings(st);
  const auto wm = load_whitening_model(st);
  IcaConfig cfg;
  if (o.nonlinearity == "logcosh") cfg.nonlinearity = Nonlinearity::LogCosh;
  else if (o.nonlinearity == "cube") cfg.nonlinearity = Nonlinearity::Cube;
  else throw CLI::ValidationError("--nonlinearity", "expected logcosh or cube");
  cfg.alpha = o.alpha;
  cfg.max_iter = o.max_iter;
  cfg.tol = o.tol;
  cfg.seed = o.seed;
  const auto r = canonicalize(fit_ica(apply_whitening(wm, emb.vectors), cfg));
  for (const auto& w : r.warnings) st.warn(w);
  st.write_cache("ica.bin", [&](std::ostream& f) { save_ica(r, f); });
  *st.report << "ica: " << r.iterations << " iterations, " << (r.converged ? "converged" : "not converged") << '\n';
}

inline void cmd_hoc(const Options&, Stage& st) {
  const auto c = load_components(st);
  const auto h = hoc_matrix(c.s);
  st.write_cache("hoc.bin", [&](std::ostream& f) { save_hoc(h, f); });
  std::string csv = st.header("#", {"content: HOC matrix E(S_i^2 S_j^2) over display axes (diagonal is E(S_i^4))",
                                    "variant: unnormalized components"});
  csv += "axis";
  for (std::size_t j = 0; j < h.dim(); ++j) csv += "," + std::to_string(j);
  csv += "\n";
  for (std::size_t i = 0; i < h.dim(); ++i) {
    csv += std::to_string(i);
    for (std::size_t j = 0; j < h.dim(); ++j) csv += "," + num(h(i, j));
    csv += "\n";
  }
  st.write_text(st.out / "hoc_matrix.csv", csv);
  *st.report << "hoc: " << h.dim() << "x" << h.dim() << '\n';
}

inline std::vector<std::size_t> axes_or_default(const Options& o, std::size_t d, std::size_t fallback) {
  if (!o.axes.empty()) {
    auto axes = parse_list(o.axes, "--axes");
    check_axes(axes, d);
    return axes;
  }
  std::vector<std::size_t> axes(std::min(d, fallback));
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  return axes;
}

inline void cmd_top_words(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto axes = axes_or_default(o, static_cast<std::size_t>(c.s.cols()), 10);
  std::string tsv = st.header("#", {"content: top words per display axis by component value",
                                    "filter: frequency >= " + std::to_string(o.min_freq)});
  tsv += "axis\trank\tword\tvalue\tcount\n";
  for (auto a : axes) {
    const auto tw = top_words(c.s, c.emb.vocab, c.emb.counts, a, o.k, o.min_freq);
    for (const auto& w : tw.warnings) st.warn(w);
    for (std::size_t r = 0; r < tw.words.size(); ++r)
      tsv += std::to_string(a) + "\t" + std::to_string(r + 1) + "\t" + tw.words[r] + "\t" + num(tw.values[r]) + "\t" +
             std::to_string(c.emb.counts[tw.rows[r]]) + "\n";
  }
  st.write_text(st.out / "top_words.tsv", tsv);
}

inline void cmd_contributors(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto d = static_cast<std::size_t>(c.s.cols());
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::optional<HocMatrix> h;
  if (!o.pairs.empty()) {
    for (const auto& item : split_commas(o.pairs)) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw CLI::ValidationError("--pairs", "expected i:j entries");
      const auto i = detail::parse_integer<std::size_t>(std::string_view(item).substr(0, colon));
      const auto j = detail::parse_integer<std::size_t>(std::string_view(item).substr(colon + 1));
      if (!i || !j) throw CLI::ValidationError("--pairs", "bad entry '" + item + "'");
      pairs.emplace_back(static_cast<std::size_t>(*i), static_cast<std::size_t>(*j));
      check_axes({pairs.back().first, pairs.back().second}, d);
    }
  } else {
    h = load_hoc_matrix(st);
    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) all.emplace_back(i, j);
    std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
      return (*h)(a.first, a.second) > (*h)(b.first, b.second);
    });
    all.resize(std::min(all.size(), o.top_pairs));
    pairs = all;
  }
  std::string tsv = st.header("#", {"content: words contributing most to E(S_i^2 S_j^2) for strongly dependent axis pairs",
                                    "contribution: s_i^2 s_j^2 on unnormalized components"});
  tsv += "axis_i\taxis_j\thoc\trank\tword\tcontribution\ts_i\ts_j\n";
  for (const auto& [i, j] : pairs) {
    const auto list = top_contributors(c.s, c.emb.vocab, i, j, o.k);
    const double hij = h ? (*h)(i, j) : (c.s.col(static_cast<Eigen::Index>(i)).array().square() *
                                         c.s.col(static_cast<Eigen::Index>(j)).array().square()).mean();
    for (std::size_t r = 0; r < list.entries.size(); ++r) {
      const auto& e = list.entries[r];
      tsv += std::to_string(i) + "\t" + std::to_string(j) + "\t" + num(hij) + "\t" + std::to_string(r + 1) + "\t" +
             e.word + "\t" + num(e.value) + "\t" + num(c.s(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(i))) +
             "\t" + num(c.s(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(j))) + "\n";
    }
  }
  st.write_text(st.out / "contributors.tsv", tsv);
}

inline void cmd_freq_corr(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto r = frequency_correlation(c.s, c.emb.counts, o.log_counts);
  std::string csv = st.header("#", {"content: Pearson r between word frequency and component value per axis",
                                    std::string("frequency scale: ") + (o.log_counts ? "log(1 + count)" : "raw count")});
  csv += "axis,r,degenerate\n";
  for (std::size_t a = 0; a < r.size(); ++a)
    csv += std::to_string(a) + "," + num(r[a].r) + "," + (r[a].degenerate ? "1" : "0") + "\n";
  st.write_text(st.out / "freq_corr.csv", csv);
}

inline void cmd_hoc_hist(const Options& o, Stage& st) {
  const auto h = load_hoc_matrix(st);
  const auto counts = hoc_histogram(h, o.include_diag, o.bins, o.lo, o.hi);
  std::string csv = st.header("#", {"content: histogram of HOC entries",
                                    std::string("entries: ") + (o.include_diag ? "upper triangle and diagonal" : "upper triangle, i < j"),
                                    "values outside [lo, hi] are counted in the end bins"});
  csv += "bin_lo,bin_hi,count\n";
  const double width = (o.hi - o.lo) / static_cast<double>(o.bins);
  for (std::size_t b = 0; b < counts.size(); ++b)
    csv += num(o.lo + width * static_cast<double>(b)) + "," + num(o.lo + width * static_cast<double>(b + 1)) + "," +
           std::to_string(counts[b]) + "\n";
  st.write_text(st.out / "hoc_hist.csv", csv);
}

inline void cmd_intrusion(const Options& o, Stage& st) {
  const auto c = load_components(st);
  IntrusionConfig cfg;
  cfg.top_k = o.k;
  cfg.intruders = o.intruders;
  cfg.min_freq = o.min_freq;
  cfg.low_q = o.low_q;
  cfg.high_q = o.high_q;
  cfg.filter_pool = o.filter_pool;
  cfg.normalize_rows = o.normalize_rows;
  const auto scores = score_all_axes(c.s, c.emb.vocab, c.emb.counts, cfg, o.seed);
  const auto sigma = sigma_order(scores);

  std::string tsv = st.header("#", {"content: word-intrusion consistency per axis, sorted by score (sigma order)",
                                    std::string("distances: ") + (o.normalize_rows ? "norm-1 rows" : "unnormalized components"),
                                    "axis a samples intruders with seed + a"});
  tsv += "sigma_rank\taxis\tscore\tintra\tinter\ttop_words\n";
  nlohmann::json j{{"provenance", st.provenance_json()}, {"sigma", sigma.sigma}};
  auto& arr = j["scores"] = nlohmann::json::array();
  for (std::size_t r = 0; r < sigma.sigma.size(); ++r) {
    const auto& sc = scores[sigma.sigma[r]];
    tsv += std::to_string(r) + "\t" + std::to_string(sc.axis) + "\t" + num(sc.score) + "\t" + num(sc.intra) + "\t" +
           num(sc.inter) + "\t" + join(sc.top_words, " ") + "\n";
  }
  for (const auto& sc : scores)
    arr.push_back({{"axis", sc.axis}, {"score", sc.score}, {"intra", sc.intra}, {"inter", sc.inter}, {"seed", sc.seed},
                   {"top_words", sc.top_words}, {"intruder_sample", sc.intruder_sample}});
  st.write_text(st.cache / "intrusion.json", j.dump(1) + "\n");
  st.write_text(st.out / "intrusion.tsv", tsv);
}

inline std::string tree_dot(const Stage& st, const Components& c, const SpanningTree& t, const ClusterAssignment* clusters,
                            std::uint64_t min_freq, const std::string& what) {
  std::ostringstream dot;
  auto header = st.provenance_lines();
  header.push_back("content: " + what);
  header.push_back("node label: axis : top word (frequency >= " + std::to_string(min_freq) + ")");
  write_dot(dot, t, [&](std::size_t k) { return top_label(c, k, min_freq); }, clusters, header);
  return dot.str();
}

inline void cmd_mst(const Options& o, Stage& st) {
  const auto h = load_hoc_matrix(st);
  std::vector<std::size_t> order;
  if (o.order == "sigma") {
    order = load_sigma(st);
  } else if (o.order == "skewness") {
    order.resize(h.dim());
    std::iota(order.begin(), order.end(), std::size_t{0});
  } else {
    throw CLI::ValidationError("--order", "expected sigma or skewness");
  }
  if (order.size() != h.dim()) throw DataError("intrusion results do not match the HOC matrix; rerun 'intrusion'");
  std::size_t n = o.nodes;
  if (n > order.size()) {
    st.warn("only " + std::to_string(order.size()) + " axes available; using all of them");
    n = order.size();
  }
  const std::vector<std::size_t> nodes(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  const auto tree = maximum_spanning_tree(build_graph(h, nodes));
  const auto c = load_components(st);

  nlohmann::json j{{"provenance", st.provenance_json()}, {"nodes", tree.nodes}};
  auto& edges = j["edges"] = nlohmann::json::array();
  for (const auto& e : tree.edges) edges.push_back({e.u, e.v, e.weight});
  st.write_text(st.cache / "mst.json", j.dump(1) + "\n");
  st.write_text(st.out / "mst.dot",
                tree_dot(st, c, tree, nullptr, o.min_freq,
                         "maximum spanning tree of the HOC graph over the first " + std::to_string(n) + " axes in " +
                             o.order + " order"));
  *st.report << "mst: " << tree.nodes.size() << " nodes, total weight " << num(tree.total_weight()) << '\n';
}

inline void cmd_cluster(const Options& o, Stage& st) {
  const auto tree = load_tree(st);
  const auto a = spectral_clustering(tree, o.clusters, o.seed);
  const auto c = load_components(st);
  nlohmann::json j{{"provenance", st.provenance_json()}, {"k", a.k}};
  auto& arr = j["clusters"] = nlohmann::json::array();
  for (std::size_t p = 0; p < a.nodes.size(); ++p)
    arr.push_back({{"axis", a.nodes[p]}, {"cluster", a.labels[p]}, {"label", top_label(c, a.nodes[p], o.min_freq)}});
  st.write_text(st.out / "clusters.json", j.dump(1) + "\n");
  st.write_text(st.out / "mst_clusters.dot",
                tree_dot(st, c, tree, &a, o.min_freq,
                         "spectral clustering of the maximum spanning tree, k=" + std::to_string(o.clusters)));
}

inline void cmd_subtree(const Options& o, Stage& st) {
  const auto tree = load_tree(st);
  const auto sub = subtree_extract(tree, o.root, o.radius);
  const auto c = load_components(st);
  st.write_text(st.out / ("subtree_" + std::to_string(o.root) + ".dot"),
                tree_dot(st, c, sub, nullptr, o.min_freq,
                         "subtree within " + std::to_string(o.radius) + " hops of axis " + std::to_string(o.root)));
}

inline void cmd_eval_sim(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto datasets = load_datasets(o.datasets);
  const auto index = make_word_index(c.emb.vocab);
  std::string csv = st.header("#", {"content: Spearman rho of cosine similarity vs gold scores",
                                    "out-of-vocabulary pairs are skipped and counted"});
  csv += "representation,dataset,rho,used,skipped\n";
  for (const auto& [name, m] : {std::pair<std::string, const Eigen::MatrixXd*>{"embedding", &c.emb.vectors},
                                std::pair<std::string, const Eigen::MatrixXd*>{"ica", &c.s}}) {
    for (const auto& ds : datasets) {
      const auto r = evaluate_similarity(*m, index, ds);
      csv += name + "," + ds.name + "," + num(r.rho) + "," + std::to_string(r.used) + "," + std::to_string(r.skipped) + "\n";
    }
  }
  st.write_text(st.out / "eval_sim.csv", csv);
}

inline void cmd_reduce_bench(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto h = load_hoc_matrix(st);
  const auto datasets = load_datasets(o.datasets);
  const auto d = static_cast<std::size_t>(c.s.cols());
  std::vector<std::size_t> dims;
  for (auto k : parse_list(o.dims, "--dims")) {
    if (k >= 1 && k <= d) dims.push_back(k);
    else st.warn("skipping reduction target " + std::to_string(k) + " (d=" + std::to_string(d) + ")");
  }
  if (dims.empty()) throw DataError("no usable reduction targets");
  const auto seeds = parse_list<std::uint64_t>(o.seeds, "--seeds");
  const auto index = make_word_index(c.emb.vocab);
  const auto table = run_reduction_benchmark(c.s, h, index, datasets, dims, seeds);
  std::string csv = st.header("#", {"content: word similarity after cluster-average dimensionality reduction",
                                    "methods: random clustering vs spectral clustering on the maximum spanning tree of all axes",
                                    "each cell averages rho over the seed list " + o.seeds});
  csv += "method,k,dataset,mean_rho,runs\n";
  for (const auto& ds : datasets)
    csv += std::string("none,") + std::to_string(d) + "," + ds.name + "," + num(evaluate_similarity(c.s, index, ds).rho) + ",1\n";
  for (const auto& cell : table)
    csv += std::string(to_string(cell.method)) + "," + std::to_string(cell.k) + "," + cell.dataset + "," +
           num(cell.mean_rho) + "," + std::to_string(cell.runs) + "\n";
  st.write_text(st.out / "reduce_bench.csv", csv);
}

inline void cmd_judge_build(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto h = load_hoc_matrix(st);
  JudgeConfig cfg;
  cfg.components = o.components;
  cfg.list_size = o.list_size;
  cfg.min_freq = o.min_freq;
  cfg.bottom_fraction = o.bottom_fraction;
  if (o.rank_by == "abs") cfg.rank_by_abs_deviation = true;
  else if (o.rank_by == "raw") cfg.rank_by_abs_deviation = false;
  else throw CLI::ValidationError("--rank-by", "expected abs or raw");
  cfg.alternate_lines = !o.fixed_lines;
  std::vector<std::string> warnings;
  const auto trials = build_trials(c.s, c.emb.vocab, c.emb.counts, h, parse_list(o.ks, "--ks"), o.seed, cfg, &warnings);
  for (const auto& w : warnings) st.warn(w);

  const auto prov = nlohmann::json{{"provenance", st.provenance_json()}}.dump() + "\n";
  std::ostringstream trials_out, requests_out;
  write_trials(trials_out, trials);
  write_requests(requests_out, trials);
  st.write_text(st.cache / "judge_trials.jsonl", prov + trials_out.str());
  st.write_text(st.out / "judge_requests.jsonl", prov + requests_out.str());
  *st.report << "judge: " << trials.size() << " trials\n";
}

inline std::vector<JudgeTrial> load_trials(const Stage& st) {
  std::ifstream in(st.require("judge_trials.jsonl", "judge-build"));
  return read_trials(in);
}

inline void cmd_judge_mock(const Options& o, Stage& st) {
  const auto trials = load_trials(st);
  std::unordered_map<std::string, const JudgeTrial*> by_prompt;
  for (const auto& t : trials) by_prompt.emplace(t.prompt, &t);
  std::unordered_map<std::string, std::size_t> clusters;
  if (o.mode == "clusters") {
    if (o.word_clusters.empty()) throw CLI::ValidationError("--word-clusters", "required with --mode clusters");
    auto in = detail::open_input(o.word_clusters);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream fields{std::string(detail::strip_cr(line))};
      std::string word, id_text, extra;
      if (!(fields >> word) || word.front() == '#') continue;
      const auto id = (fields >> id_text) && !(fields >> extra) ? detail::parse_integer<std::size_t>(id_text) : std::nullopt;
      if (!id) throw DataError(o.word_clusters + " line " + std::to_string(line_no) + ": expected 'word cluster'");
      clusters[word] = *id;
    }
  } else if (o.mode != "coin") {
    throw CLI::ValidationError("--mode", "expected clusters or coin");
  }
  const JudgeFn judge = [&](const std::string& prompt, std::chrono::milliseconds) -> std::string {
    const auto& t = *by_prompt.at(prompt);
    if (o.mode == "clusters") return mock_judge(t, clusters);
    Rng rng(derive_seed(o.seed, {fnv1a(t.id)}));
    return std::bernoulli_distribution(0.5)(rng) ? "AB" : "CD";
  };
  const auto verdicts = dispatch(trials, judge);
  std::ostringstream out;
  write_responses(out, verdicts);
  st.write_text(st.out / "judge_responses.jsonl", nlohmann::json{{"provenance", st.provenance_json()}}.dump() + "\n" + out.str());
}

inline void cmd_judge_aggregate(const Options& o, Stage& st) {
  const auto trials = load_trials(st);
  const fs::path path = o.responses.empty() ? st.out / "judge_responses.jsonl" : fs::path(o.responses);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string() + ": run 'judge-mock' or supply --responses");
  std::size_t missing = 0;
  const auto verdicts = match_responses(trials, read_responses(in), &missing);
  if (missing) st.warn(std::to_string(missing) + " trials have no response; counted as undecided");
  std::size_t failures = 0;
  for (const auto& v : verdicts) failures += v.parsed == Verdict::ParseFailure;
  if (failures) st.warn(std::to_string(failures) + " responses did not parse; counted as undecided");
  const auto rows = aggregate(verdicts);
  std::string csv = st.header("#", {"content: judge verdict percentages per correlation rank k",
                                    "high: pair with the k-th most dependent axis; low: pair with a weakly dependent axis"});
  csv += "k,trials,high_pct,low_pct,undecided_pct\n";
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.1f,%.1f,%.1f\n", r.k, r.total, r.high_pct, r.low_pct, r.undecided_pct);
    csv += buf;
  }
  st.write_text(st.out / "judge_aggregate.csv", csv);
}

inline Eigen::MatrixXd normalized_components(const Components& c) { return normalize_rows(c.s, &c.emb.vocab); }

inline void cmd_export_heatmap(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto axes = axes_or_default(o, static_cast<std::size_t>(c.s.cols()), 5);
  const auto sn = normalized_components(c);
  std::string csv = st.header("#", {"content: heatmap of top words (rows) against display axes (columns)",
                                    "values: norm-1 normalized component rows",
                                    "rows: top " + std::to_string(o.k) + " words per axis, frequency >= " + std::to_string(o.min_freq)});
  csv += "word,source_axis";
  for (auto a : axes) csv += ",s_" + std::to_string(a);
  csv += "\n";
  for (auto a : axes) {
    const auto tw = top_words(c.s, c.emb.vocab, c.emb.counts, a, o.k, o.min_freq);
    for (const auto& w : tw.warnings) st.warn(w);
    for (auto row : tw.rows) {
      csv += c.emb.vocab[row] + "," + std::to_string(a);
      for (auto b : axes) csv += "," + num(sn(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(b)));
      csv += "\n";
    }
  }
  st.write_text(st.out / "heatmap.csv", csv);
}

inline void cmd_export_scatter(const Options& o, Stage& st) {
  const auto c = load_components(st);
  const auto axes = parse_list(o.axes, "--axes");
  if (axes.size() != 2) throw CLI::ValidationError("--axes", "expected exactly two axes, e.g. 10,2");
  check_axes(axes, static_cast<std::size_t>(c.s.cols()));
  const auto a = static_cast<Eigen::Index>(axes[0]);
  const auto b = static_cast<Eigen::Index>(axes[1]);
  const auto sn = normalized_components(c);
  std::string csv = st.header("#", {"content: per-word scatter of two display axes",
                                    "coordinates: norm-1 normalized component rows",
                                    "contribution: s_a^2 s_b^2 on unnormalized components"});
  csv += "word,s_" + std::to_string(axes[0]) + ",s_" + std::to_string(axes[1]) + ",contribution\n";
  for (Eigen::Index r = 0; r < c.s.rows(); ++r)
    csv += c.emb.vocab[static_cast<std::size_t>(r)] + "," + num(sn(r, a)) + "," + num(sn(r, b)) + "," +
           num(c.s(r, a) * c.s(r, a) * c.s(r, b) * c.s(r, b)) + "\n";
  st.write_text(st.out / ("scatter_" + std::to_string(axes[0]) + "_" + std::to_string(axes[1]) + ".csv"), csv);
}

/// Subcommand name, handler, seeded options.
struct Command {
  CLI::App* app;
  void (*run)(const Options&, Stage&);
  std::vector<std::string> seed_names;
};

/// Config file entries become command-line tokens placed before the user's
/// own arguments; options take their last value, so flags win.
inline std::vector<std::string> config_tokens(const std::string& path, CLI::App& sub) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + path);
  std::vector<std::string> tokens;
  for (const auto& item : CLI::ConfigTOML().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    const bool scoped = !item.parents.empty();
    if (scoped && (item.parents.size() != 1 || item.parents[0] != sub.get_name())) continue;
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    const auto* opt = sub.get_option_no_throw("--" + name);
    if (!opt || name == "config") {
      if (scoped) throw CLI::ValidationError("--config", "unknown key '" + item.name + "' for " + sub.get_name());
      continue;  // top-level keys may belong to other stages
    }
    if (opt->get_expected_min() == 0) {
      const auto v = item.inputs.empty() ? std::string("true") : item.inputs.front();
      if (v == "true" || v == "1") tokens.push_back("--" + name);
      else if (v != "false" && v != "0") throw CLI::ValidationError("--config", "bad flag value for " + item.name);
      continue;
    }
    tokens.push_back("--" + name);
    tokens.push_back(join(item.inputs, ","));
  }
  return tokens;
}

/// Canonical "key=value" lines of every option that shapes results; paths of
/// the cache and output directories are excluded so relocating a run keeps
/// its hash.
inline std::string canonical_settings(const CLI::App& sub) {
  std::vector<std::string> lines;
  for (const auto* opt : sub.get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || name == "cache-dir" || name == "out") continue;
    std::string value;
    if (opt->get_expected_min() == 0) value = opt->count() ? "true" : "false";
    else value = opt->count() ? join(opt->results(), ",") : opt->get_default_str();
    lines.push_back(name + "=" + value);
  }
  std::sort(lines.begin(), lines.end());
  return sub.get_name() + "\n" + join(lines, "\n");
}

inline int run_cli(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Options o;
  CLI::App app{"ICA component analysis with higher-order correlations", "icahoc"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ICAHOC_VERSION));

  std::vector<Command> commands;
  const auto add = [&](const std::string& name, const std::string& desc, void (*fn)(const Options&, Stage&),
                       std::vector<std::string> seeds = {}) {
    auto* sub = app.add_subcommand(name, desc);
    sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    sub->add_option("--config", o.config, "key=value config file; command-line flags win");
    sub->add_option("--cache-dir", o.cache_dir, "directory for intermediate artifacts")->capture_default_str();
    sub->add_option("--out", o.out_dir, "directory for exported results")->capture_default_str();
    commands.push_back({sub, fn, std::move(seeds)});
    return sub;
  };
  const auto seed_opt = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "random seed")->capture_default_str(); };

  auto* ingest = add("ingest", "load word2vec text and frequencies into the cache", cmd_ingest);
  ingest->add_option("--embeddings", o.embeddings, "word2vec text file")->required();
  ingest->add_option("--frequencies", o.frequencies, "word<TAB>count file");
  ingest->add_flag("--strict-freq", o.strict_freq, "fail on words without a frequency entry");

  auto* whiten = add("whiten", "fit PCA whitening", cmd_whiten);
  whiten->add_option("--dim", o.dim, "output dimension (0 keeps all)")->capture_default_str();
  whiten->add_option("--eps", o.eps, "relative eigenvalue floor")->capture_default_str();

  auto* ica = add("ica", "fit FastICA on whitened embeddings", cmd_ica, {"seed"});
  ica->add_option("--nonlinearity", o.nonlinearity, "logcosh or cube")->capture_default_str();
  ica->add_option("--alpha", o.alpha, "logcosh scale")->capture_default_str();
  ica->add_option("--max-iter", o.max_iter, "iteration limit")->capture_default_str();
  ica->add_option("--tol", o.tol, "convergence tolerance")->capture_default_str();
  seed_opt(ica);

  add("hoc", "compute the HOC matrix", cmd_hoc);

  const auto word_opts = [&](CLI::App* sub) {
    sub->add_option("--k", o.k, "words per list")->capture_default_str();
    sub->add_option("--min-freq", o.min_freq, "minimum word frequency")->capture_default_str();
  };
  auto* tw = add("top-words", "top words per axis", cmd_top_words);
  tw->add_option("--axes", o.axes, "axis list, e.g. 0-9 or 10,2");
  word_opts(tw);

  auto* contrib = add("contributors", "words contributing most to axis-pair dependence", cmd_contributors);
  contrib->add_option("--pairs", o.pairs, "axis pairs, e.g. 0:1,3:7");
  contrib->add_option("--top-pairs", o.top_pairs, "use the most dependent pairs when --pairs is absent")->capture_default_str();
  contrib->add_option("--k", o.k, "words per pair")->capture_default_str();

  auto* fc = add("freq-corr", "correlation of word frequency with each axis", cmd_freq_corr);
  fc->add_flag("--log", o.log_counts, "use log(1 + count)");

  auto* hist = add("hoc-hist", "histogram of HOC entries", cmd_hoc_hist);
  hist->add_option("--bins", o.bins, "bin count")->capture_default_str();
  hist->add_option("--lo", o.lo, "histogram lower bound")->capture_default_str();
  hist->add_option("--hi", o.hi, "histogram upper bound")->capture_default_str();
  hist->add_flag("--include-diag", o.include_diag, "include diagonal fourth moments");

  auto* intr = add("intrusion", "word-intrusion consistency scores and sigma order", cmd_intrusion, {"seed"});
  word_opts(intr);
  intr->add_option("--intruders", o.intruders, "intruders sampled per axis")->capture_default_str();
  intr->add_option("--low-q", o.low_q, "bottom fraction on the scored axis")->capture_default_str();
  intr->add_option("--high-q", o.high_q, "top fraction on some other axis")->capture_default_str();
  intr->add_flag("--filter-pool", o.filter_pool, "apply --min-freq to intruders too");
  intr->add_flag("--normalize-rows", o.normalize_rows, "distances between norm-1 rows");
  seed_opt(intr);

  auto* mst = add("mst", "maximum spanning tree over the leading axes", cmd_mst);
  mst->add_option("--nodes", o.nodes, "number of leading axes")->capture_default_str();
  mst->add_option("--order", o.order, "sigma (consistency) or skewness")->capture_default_str();
  mst->add_option("--min-freq", o.min_freq, "frequency filter for node labels")->capture_default_str();

  auto* cl = add("cluster", "spectral clustering of the spanning tree", cmd_cluster, {"seed"});
  cl->add_option("--clusters", o.clusters, "cluster count")->capture_default_str();
  cl->add_option("--min-freq", o.min_freq, "frequency filter for node labels")->capture_default_str();
  seed_opt(cl);

  auto* sub = add("subtree", "neighbourhood of one axis in the spanning tree", cmd_subtree);
  sub->add_option("--root", o.root, "root axis")->required();
  sub->add_option("--radius", o.radius, "hop radius")->capture_default_str();
  sub->add_option("--min-freq", o.min_freq, "frequency filter for node labels")->capture_default_str();

  auto* ev = add("eval-sim", "word similarity of the embedding and its ICA components", cmd_eval_sim);
  ev->add_option("--datasets", o.datasets, "comma-separated similarity files")->required();

  auto* rb = add("reduce-bench", "dimensionality reduction benchmark", cmd_reduce_bench, {"seeds"});
  rb->add_option("--datasets", o.datasets, "comma-separated similarity files")->required();
  rb->add_option("--dims", o.dims, "target dimensions")->capture_default_str();
  rb->add_option("--seeds", o.seeds, "seed list")->capture_default_str();

  auto* jb = add("judge-build", "build relatedness trials and request file", cmd_judge_build, {"seed"});
  jb->add_option("--ks", o.ks, "correlation ranks")->capture_default_str();
  jb->add_option("--components", o.components, "leading axes to probe")->capture_default_str();
  jb->add_option("--list-size", o.list_size, "words per list")->capture_default_str();
  jb->add_option("--min-freq", o.min_freq, "minimum word frequency")->capture_default_str();
  jb->add_option("--bottom-fraction", o.bottom_fraction, "weakly dependent fraction")->capture_default_str();
  jb->add_option("--rank-by", o.rank_by, "abs (|hoc - 1|) or raw")->capture_default_str();
  jb->add_flag("--fixed-lines", o.fixed_lines, "never swap the two list-pair lines");
  seed_opt(jb);

  auto* jm = add("judge-mock", "answer trials offline with a mock judge", cmd_judge_mock, {"seed"});
  jm->add_option("--mode", o.mode, "clusters or coin")->capture_default_str();
  jm->add_option("--word-clusters", o.word_clusters, "word<TAB>cluster file for --mode clusters");
  seed_opt(jm);

  auto* ja = add("judge-aggregate", "aggregate judge responses per k", cmd_judge_aggregate);
  ja->add_option("--responses", o.responses, "response file (default: <out>/judge_responses.jsonl)");

  auto* hm = add("export-heatmap-data", "top-word by axis heatmap data", cmd_export_heatmap);
  hm->add_option("--axes", o.axes, "axis list")->capture_default_str();
  word_opts(hm);

  auto* sc = add("export-scatter-data", "two-axis scatter data with contributions", cmd_export_scatter);
  sc->add_option("--axes", o.axes, "two axes, e.g. 10,2")->required();

  Command* chosen = nullptr;
  try {
    // Expand the config file before parsing so explicit flags override it.
    if (!args.empty()) {
      for (auto& c : commands)
        if (c.app->get_name() == args[0]) chosen = &c;
      if (chosen) {
        std::optional<std::string> config;
        for (std::size_t i = 1; i < args.size(); ++i) {
          if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
          else if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
        }
        if (config) {
          auto tokens = config_tokens(*config, *chosen->app);
          args.insert(args.begin() + 1, tokens.begin(), tokens.end());
        }
      }
    }
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  for (auto& c : commands) {
    if (!c.app->parsed()) continue;
    Stage st;
    st.command = c.app->get_name();
    st.cache = o.cache_dir;
    st.out = o.out_dir;
    st.config_hash = hex64(fnv1a(canonical_settings(*c.app)));
    st.log = &err;
    st.report = &out;
    for (const auto& s : c.seed_names)
      if (s == "seed") st.seeds.emplace_back("seed", o.seed);
    // later stages inherit the seed that shaped the components
    const auto ica_prov = st.cache / "ica.prov.json";
    if (st.command != "ingest" && st.command != "whiten" && st.command != "ica" && fs::exists(ica_prov)) {
      try {
        st.seeds.emplace_back("ica-seed", load_json(ica_prov).at("seeds").at("seed").get<std::uint64_t>());
      } catch (const std::exception&) {
        st.warn("unreadable " + ica_prov.string());
      }
    }
    if (std::find(c.seed_names.begin(), c.seed_names.end(), "seeds") != c.seed_names.end()) {
      try {
        for (auto v : parse_list<std::uint64_t>(o.seeds, "--seeds")) st.seeds.emplace_back("seed", v);
      } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kOk : kUsage;
      }
    }
    try {
      c.run(o, st);
      return kOk;
    } catch (const CLI::ParseError& e) {
      err << "error: " << e.what() << '\n';
      return kUsage;
    } catch (const NumericError& e) {
      err << "numeric error: " << e.what() << '\n';
      return kNumeric;
    } catch (const DataError& e) {
      err << "error: " << e.what() << '\n';
      return kData;
    } catch (const fs::filesystem_error& e) {
      err << "error: " << e.what() << '\n';
      return kData;
    }
  }
  return kUsage;
}

} // namespace icahoc::cli

#endif
