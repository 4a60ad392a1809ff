#pragma once

#include <stdexcept>
#include <string>

namespace rolegraph {

enum class Errc {
  malformed_record,
  dangling_supporting_fact,
  span_out_of_range,
  unknown_sentence_ref,
  empty_phrase,
  empty_left_sequence,
  empty_sequence,
  too_few_paragraphs,
  bad_mask,
  shape_mismatch,
  unknown_node,
  no_neighbors,
  gold_path_disconnected,
  length_mismatch,
  gold_span_out_of_range,
  non_finite_loss,
  config_error,
  audit_failure,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_record: return "MalformedRecord";
    case Errc::dangling_supporting_fact: return "DanglingSupportingFact";
    case Errc::span_out_of_range: return "SpanOutOfRange";
    case Errc::unknown_sentence_ref: return "UnknownSentenceRef";
    case Errc::empty_phrase: return "EmptyPhrase";
    case Errc::empty_left_sequence: return "EmptyLeftSequence";
    case Errc::empty_sequence: return "EmptySequence";
    case Errc::too_few_paragraphs: return "TooFewParagraphs";
    case Errc::bad_mask: return "BadMask";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::unknown_node: return "UnknownNode";
    case Errc::no_neighbors: return "NoNeighbors";
    case Errc::gold_path_disconnected: return "GoldPathDisconnected";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::gold_span_out_of_range: return "GoldSpanOutOfRange";
    case Errc::non_finite_loss: return "NonFiniteLoss";
    case Errc::config_error: return "ConfigError";
    case Errc::audit_failure: return "AuditFailure";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& msg)
      : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}
  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, Errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

}  // namespace rolegraph
