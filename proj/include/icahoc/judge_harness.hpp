#ifndef ICAHOC_JUDGE_HARNESS_HPP
#define ICAHOC_JUDGE_HARNESS_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "icahoc/error.hpp"
#include "icahoc/hoc_analysis.hpp"
#include "icahoc/random.hpp"

namespace icahoc {

// Pairwise relatedness trials: for component i, does (list-1, list-2) or
// (list-1, list-3) look more related to a text judge? list-2 comes from the
// k-th most HOC-dependent component, list-3 from a weakly dependent one.

struct JudgeConfig {
  std::size_t components = 100;     // first N display axes by skewness
  std::size_t list_size = 5;
  std::uint64_t min_freq = 100;
  double bottom_fraction = 0.3;
  bool rank_by_abs_deviation = true;  // |E(Si^2 Sj^2) - 1|; false ranks by raw value
  bool alternate_lines = true;        // randomly swap the two "List pair" lines
};

struct JudgeTrial {
  std::string id;
  std::string twin_id;
  std::size_t component = 0;
  std::size_t k = 0;
  std::size_t related_component = 0;
  std::size_t low_component = 0;
  std::vector<std::string> list1;
  std::vector<std::string> high_list;  // from the k-th most dependent component
  std::vector<std::string> low_list;   // from the bottom of the ranking
  bool high_is_ab = true;              // label map: AB names the high pair
  bool lines_swapped = false;
  std::uint64_t seed = 0;
  std::string prompt;

  const std::vector<std::string>& list_ab() const { return high_is_ab ? high_list : low_list; }
  const std::vector<std::string>& list_cd() const { return high_is_ab ? low_list : high_list; }
};

enum class Verdict { AB, CD, XX, ParseFailure };
enum class Resolution { HighPair, LowPair, Undecided };

inline const char* to_string(Verdict v) {
  switch (v) {
  case Verdict::AB: return "AB";
  case Verdict::CD: return "CD";
  case Verdict::XX: return "XX";
  case Verdict::ParseFailure: return "parse-failure";
  }
  return "?";
}

inline const char* to_string(Resolution r) {
  switch (r) {
  case Resolution::HighPair: return "high-pair";
  case Resolution::LowPair: return "low-pair";
  case Resolution::Undecided: return "undecided";
  }
  return "?";
}

struct JudgeVerdict {
  std::string trial_id;
  std::size_t k = 0;
  std::string raw;
  Verdict parsed = Verdict::ParseFailure;
  Resolution resolved = Resolution::Undecided;
};

/// Renders a word list the way a Python list prints: ['a', 'b'].
inline std::string render_word_list(const std::vector<std::string>& words) {
  std::string out = "[";
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ", ";
    out += '\'';
    out += words[i];
    out += '\'';
  }
  out += ']';
  return out;
}

inline std::string render_prompt(const std::vector<std::string>& list1, const std::vector<std::string>& list2,
                                 const std::vector<std::string>& list3, bool lines_swapped = false) {
  const auto l1 = render_word_list(list1);
  const std::string ab = "List pair (A, B): (" + l1 + ", " + render_word_list(list2) + ")\n";
  const std::string cd = "List pair (C, D): (" + l1 + ", " + render_word_list(list3) + ")\n";
  std::string prompt =
      "Question:\n"
      "  You are given 2 list pairs (A, B), (C, D).\n"
      "  If one pair is more semantically relevant than the other, answer the pair.\n"
      "  If you cannot determine, answer \"XX\".\n"
      "\n";
  prompt += lines_swapped ? cd + ab : ab + cd;
  prompt +=
      "\n"
      "Output:\n"
      "  \"AB\" if (A, B) is more semantically related\n"
      "  \"CD\" if (C, D) is more semantically related\n"
      "  \"XX\" if equally related, or you can't decide\n"
      "Respond with only AB, CD, or XX.";
  return prompt;
}

/// Other axes ordered from most to least dependent on `axis` (ties by index).
inline std::vector<std::size_t> dependence_ranking(const HocMatrix& hoc, std::size_t axis, bool by_abs_deviation = true) {
  if (axis >= hoc.dim()) throw DataError("axis " + std::to_string(axis) + " out of range");
  const auto strength = [&](std::size_t j) { return by_abs_deviation ? std::abs(hoc(axis, j) - 1.0) : hoc(axis, j); };
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < hoc.dim(); ++j)
    if (j != axis) others.push_back(j);
  std::stable_sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) { return strength(a) > strength(b); });
  return others;
}

/// Two counterbalanced trials per (component, k): the twin swaps which list
/// sits in the (A, B) slot. Per-(i, k) randomness is derived from `seed`.
inline std::vector<JudgeTrial> build_trials(const Eigen::MatrixXd& s, const std::vector<std::string>& vocab,
                                            const std::vector<std::uint64_t>& counts, const HocMatrix& hoc,
                                            const std::vector<std::size_t>& ks, std::uint64_t seed,
                                            const JudgeConfig& cfg = {}, std::vector<std::string>* warnings = nullptr) {
  const auto d = static_cast<std::size_t>(s.cols());
  if (hoc.dim() != d) throw DataError("HOC matrix dimension does not match components");
  if (d < 3) throw DataError("judge trials need at least 3 components");
  std::size_t components = cfg.components;
  if (d < components) {
    if (warnings) warnings->push_back("only " + std::to_string(d) + " components available; using all of them");
    components = d;
  }
  for (auto k : ks)
    if (k < 1 || k > d - 1) throw DataError("correlation rank k=" + std::to_string(k) + " out of range");

  std::map<std::size_t, std::vector<std::string>> top_cache;
  const auto top = [&](std::size_t axis) -> const std::vector<std::string>& {
    auto it = top_cache.find(axis);
    if (it != top_cache.end()) return it->second;
    auto words = top_words(s, vocab, counts, axis, cfg.list_size, cfg.min_freq).words;
    if (words.size() < cfg.list_size)
      throw DataError("axis " + std::to_string(axis) + ": insufficient vocabulary after frequency filter");
    return top_cache.emplace(axis, std::move(words)).first->second;
  };

  std::vector<JudgeTrial> trials;
  for (std::size_t i = 0; i < components; ++i) {
    const auto ranking = dependence_ranking(hoc, i, cfg.rank_by_abs_deviation);
    const auto bottom = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.bottom_fraction * static_cast<double>(ranking.size()))));
    for (auto k : ks) {
      const auto related = ranking[k - 1];
      std::vector<std::size_t> low_pool;
      for (std::size_t p = ranking.size() - std::min(bottom, ranking.size()); p < ranking.size(); ++p)
        if (ranking[p] != related) low_pool.push_back(ranking[p]);
      if (low_pool.empty()) throw DataError("no low-dependence component available for axis " + std::to_string(i));

      const auto trial_seed = derive_seed(seed, {i, k});
      Rng rng(trial_seed);
      std::uniform_int_distribution<std::size_t> pick(0, low_pool.size() - 1);
      const auto low = low_pool[pick(rng)];

      auto list1 = top(i);
      auto high = top(related);
      auto lowl = top(low);
      shuffle_in_place(list1, rng);
      shuffle_in_place(high, rng);
      shuffle_in_place(lowl, rng);

      const std::string base = "c" + std::to_string(i) + "-k" + std::to_string(k);
      for (int twin = 0; twin < 2; ++twin) {
        JudgeTrial t;
        t.id = base + (twin == 0 ? "-a" : "-b");
        t.twin_id = base + (twin == 0 ? "-b" : "-a");
        t.component = i;
        t.k = k;
        t.related_component = related;
        t.low_component = low;
        t.list1 = list1;
        t.high_list = high;
        t.low_list = lowl;
        t.high_is_ab = twin == 0;
        t.seed = trial_seed;
        if (cfg.alternate_lines) t.lines_swapped = std::bernoulli_distribution(0.5)(rng);
        t.prompt = render_prompt(t.list1, t.list_ab(), t.list_cd(), t.lines_swapped);
        trials.push_back(std::move(t));
      }
    }
  }
  return trials;
}

/// Trims whitespace and accepts exactly AB, CD or XX (any case).
inline Verdict parse_response(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return Verdict::ParseFailure;
  const auto last = text.find_last_not_of(" \t\r\n\f\v");
  const auto core = text.substr(first, last - first + 1);
  if (core.size() != 2) return Verdict::ParseFailure;
  std::string up;
  for (char c : core) up.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (up == "AB") return Verdict::AB;
  if (up == "CD") return Verdict::CD;
  if (up == "XX") return Verdict::XX;
  return Verdict::ParseFailure;
}

inline Resolution resolve(const JudgeTrial& t, Verdict v) {
  switch (v) {
  case Verdict::AB: return t.high_is_ab ? Resolution::HighPair : Resolution::LowPair;
  case Verdict::CD: return t.high_is_ab ? Resolution::LowPair : Resolution::HighPair;
  default: return Resolution::Undecided;
  }
}

inline JudgeVerdict make_verdict(const JudgeTrial& t, std::string raw) {
  JudgeVerdict v;
  v.trial_id = t.id;
  v.k = t.k;
  v.parsed = parse_response(raw);
  v.resolved = resolve(t, v.parsed);
  v.raw = std::move(raw);
  return v;
}

struct AggregateRow {
  std::size_t k = 0;
  std::size_t total = 0;
  double high_pct = 0.0;
  double low_pct = 0.0;
  double undecided_pct = 0.0;
};

/// Percentages per k over all verdicts; parse failures count as undecided.
/// Every k in `ks` must have at least one verdict.
inline std::vector<AggregateRow> aggregate(const std::vector<JudgeVerdict>& verdicts, const std::vector<std::size_t>& ks) {
  std::map<std::size_t, std::array<std::size_t, 3>> tally;
  for (const auto& v : verdicts) ++tally[v.k][static_cast<std::size_t>(v.resolved)];
  std::vector<AggregateRow> rows;
  for (auto k : ks) {
    auto it = tally.find(k);
    if (it == tally.end()) throw DataError("no verdicts for k=" + std::to_string(k));
    const auto& c = it->second;
    const double total = static_cast<double>(c[0] + c[1] + c[2]);
    rows.push_back({k, c[0] + c[1] + c[2], 100.0 * static_cast<double>(c[0]) / total,
                    100.0 * static_cast<double>(c[1]) / total, 100.0 * static_cast<double>(c[2]) / total});
  }
  return rows;
}

inline std::vector<AggregateRow> aggregate(const std::vector<JudgeVerdict>& verdicts) {
  std::set<std::size_t> ks;
  for (const auto& v : verdicts) ks.insert(v.k);
  if (ks.empty()) throw DataError("empty verdict set");
  return aggregate(verdicts, {ks.begin(), ks.end()});
}

/// Offline judge: answers the pair whose two lists share more cluster ids;
/// equal overlap gives "XX". Words missing from the map carry no cluster.
inline std::string mock_judge(const JudgeTrial& t, const std::unordered_map<std::string, std::size_t>& cluster_of) {
  const auto clusters = [&](const std::vector<std::string>& words) {
    std::set<std::size_t> out;
    for (const auto& w : words) {
      auto it = cluster_of.find(w);
      if (it != cluster_of.end()) out.insert(it->second);
    }
    return out;
  };
  const auto base = clusters(t.list1);
  const auto overlap = [&](const std::vector<std::string>& words) {
    std::size_t n = 0;
    for (auto c : clusters(words)) n += base.count(c);
    return n;
  };
  const auto ab = overlap(t.list_ab());
  const auto cd = overlap(t.list_cd());
  if (ab > cd) return "AB";
  if (cd > ab) return "CD";
  return "XX";
}

/// Text-in/text-out judge. Implementations should honor the timeout and
/// throw on failure; dispatch retries.
using JudgeFn = std::function<std::string(const std::string& prompt, std::chrono::milliseconds timeout)>;

struct DispatchConfig {
  std::size_t max_in_flight = 4;
  int retries = 2;
  std::chrono::milliseconds timeout{30000};
};

/// Sends every prompt with bounded concurrency. Results are matched to
/// trials by position; a request that keeps failing becomes a parse failure.
inline std::vector<JudgeVerdict> dispatch(const std::vector<JudgeTrial>& trials, const JudgeFn& judge,
                                          const DispatchConfig& cfg = {}) {
  std::vector<std::string> raw(trials.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      for (int attempt = 0; attempt <= cfg.retries; ++attempt) {
        try {
          raw[i] = judge(trials[i].prompt, cfg.timeout);
          break;
        } catch (const std::exception&) {
          raw[i].clear();
        }
      }
    }
  };
  const auto workers = std::max<std::size_t>(1, std::min(cfg.max_in_flight, trials.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  std::vector<JudgeVerdict> out;
  out.reserve(trials.size());
  for (std::size_t i = 0; i < trials.size(); ++i) out.push_back(make_verdict(trials[i], std::move(raw[i])));
  return out;
}

// JSON-lines interchange. Lines whose object carries "provenance" are
// metadata and skipped by the readers.

inline nlohmann::json trial_to_json(const JudgeTrial& t) {
  return {{"trial_id", t.id},          {"twin_id", t.twin_id},       {"component", t.component},
          {"k", t.k},                  {"related_component", t.related_component},
          {"low_component", t.low_component},
          {"wordlist_1", t.list1},     {"high_list", t.high_list},   {"low_list", t.low_list},
          {"high_is_ab", t.high_is_ab}, {"lines_swapped", t.lines_swapped},
          {"seed", t.seed},            {"prompt", t.prompt}};
}

inline JudgeTrial trial_from_json(const nlohmann::json& j) {
  JudgeTrial t;
  t.id = j.at("trial_id").get<std::string>();
  t.twin_id = j.at("twin_id").get<std::string>();
  t.component = j.at("component").get<std::size_t>();
  t.k = j.at("k").get<std::size_t>();
  t.related_component = j.at("related_component").get<std::size_t>();
  t.low_component = j.at("low_component").get<std::size_t>();
  t.list1 = j.at("wordlist_1").get<std::vector<std::string>>();
  t.high_list = j.at("high_list").get<std::vector<std::string>>();
  t.low_list = j.at("low_list").get<std::vector<std::string>>();
  t.high_is_ab = j.at("high_is_ab").get<bool>();
  t.lines_swapped = j.at("lines_swapped").get<bool>();
  t.seed = j.at("seed").get<std::uint64_t>();
  t.prompt = j.at("prompt").get<std::string>();
  return t;
}

namespace detail {

template <typename F>
void for_each_json_line(std::istream& in, const std::string& what, F&& f) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(what + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (j.is_object() && j.contains("provenance")) continue;
    try {
      f(j);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(what + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

} // namespace detail

inline void write_requests(std::ostream& out, const std::vector<JudgeTrial>& trials) {
  for (const auto& t : trials) out << nlohmann::json{{"trial_id", t.id}, {"prompt", t.prompt}}.dump() << '\n';
}

inline void write_trials(std::ostream& out, const std::vector<JudgeTrial>& trials) {
  for (const auto& t : trials) out << trial_to_json(t).dump() << '\n';
}

inline std::vector<JudgeTrial> read_trials(std::istream& in) {
  std::vector<JudgeTrial> trials;
  detail::for_each_json_line(in, "trials", [&](const nlohmann::json& j) { trials.push_back(trial_from_json(j)); });
  return trials;
}

inline void write_responses(std::ostream& out, const std::vector<JudgeVerdict>& verdicts) {
  for (const auto& v : verdicts) out << nlohmann::json{{"trial_id", v.trial_id}, {"text", v.raw}}.dump() << '\n';
}

inline std::unordered_map<std::string, std::string> read_responses(std::istream& in) {
  std::unordered_map<std::string, std::string> out;
  detail::for_each_json_line(in, "responses", [&](const nlohmann::json& j) {
    out[j.at("trial_id").get<std::string>()] = j.at("text").get<std::string>();
  });
  return out;
}

/// Joins responses to trials by id. Trials without a response count as
/// parse failures; responses for unknown ids are an error.
inline std::vector<JudgeVerdict> match_responses(const std::vector<JudgeTrial>& trials,
                                                 const std::unordered_map<std::string, std::string>& responses,
                                                 std::size_t* missing = nullptr) {
  std::unordered_map<std::string, const JudgeTrial*> by_id;
  for (const auto& t : trials) by_id.emplace(t.id, &t);
  for (const auto& [id, text] : responses)
    if (!by_id.count(id)) throw DataError("response for unknown trial id: " + id);
  std::vector<JudgeVerdict> out;
  std::size_t absent = 0;
  for (const auto& t : trials) {
    auto it = responses.find(t.id);
    if (it == responses.end()) ++absent;
    out.push_back(make_verdict(t, it == responses.end() ? std::string{} : it->second));
  }
  if (missing) *missing = absent;
  return out;
}

} // namespace icahoc

#endif
