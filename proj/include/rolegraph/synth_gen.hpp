#pragma once

#include <cstdint>

#include "rolegraph/data_model.hpp"
#include "rolegraph/graph_build.hpp"

namespace rolegraph {

struct SynthConfig {
  int n_instances = 200;
  int n_distractors = 2;
  double bridge_fraction = 0.5;
  int vocab_size = 500;
  std::uint64_t seed = 1;
};

struct SynthCorpus {
  std::vector<QAInstance> instances;
  std::map<std::string, SrlAnnotation> srl;
};

// Bridge and comparison instances with complete SRL annotations and planted
// q -> sf1 -> sf2 chains. Deterministic in cfg.seed.
SynthCorpus generate_corpus(const SynthConfig& cfg);

// Serialized line-delimited files (the same formats data-model consumes).
void write_corpus(const SynthCorpus& corpus, const std::string& instances_path,
                  const std::string& srl_path);

struct AuditReport {
  int total = 0;
  std::vector<std::string> failures;  // offending instance ids
  double coverage = 0.0;              // fraction with a connected gold chain
  bool ok() const { return failures.empty(); }
};

// Verifies gold chains are connected, span answers recoverable from gold SF
// sentences, and labels consistent. Independent of train-eval's coverage path.
AuditReport audit(const std::vector<QAInstance>& instances,
                  const std::map<std::string, SrlAnnotation>& srl, const GraphConfig& cfg,
                  int max_hops);

// Throws AuditFailure naming the offending ids.
void require_audit(const AuditReport& report);

}  // namespace rolegraph
