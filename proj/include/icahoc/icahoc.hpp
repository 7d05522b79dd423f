#ifndef ICAHOC_ICAHOC_HPP
#define ICAHOC_ICAHOC_HPP

#include "icahoc/component_graph.hpp"
#include "icahoc/embedding_store.hpp"
#include "icahoc/error.hpp"
#include "icahoc/fastica.hpp"
#include "icahoc/hoc_analysis.hpp"
#include "icahoc/intrusion_scoring.hpp"
#include "icahoc/judge_harness.hpp"
#include "icahoc/reduction_eval.hpp"
#include "icahoc/whitening.hpp"

#define ICAHOC_VERSION "0.1.0"

#endif
