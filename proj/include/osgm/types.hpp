#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace osgm {

template <class Scalar_>
using vec_type = Eigen::Matrix<Scalar_, Eigen::Dynamic, 1>;
template <class Scalar_>
using mat_type = Eigen::Matrix<Scalar_, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = vec_type<double>;
using Mat = mat_type<double>;

// Bad configuration or input data. The CLI maps this to exit code 65.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Oracle evaluation failed (non-finite values, non-smooth probe).
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FeedbackKind { ratio, hypergradient };
enum class ActionKind { vanilla, monotone, lookahead, monotone_lookahead };
enum class PatternKind { scalar, diagonal, full };
enum class LearnerKind { ogd, adagrad };

inline std::string to_string(FeedbackKind k) {
  return k == FeedbackKind::ratio ? "ratio" : "hyper";
}

inline std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::vanilla: return "vanilla";
    case ActionKind::monotone: return "monotone";
    case ActionKind::lookahead: return "lookahead";
    case ActionKind::monotone_lookahead: return "monotone-lookahead";
  }
  return "?";
}

inline std::string to_string(PatternKind k) {
  switch (k) {
    case PatternKind::scalar: return "scalar";
    case PatternKind::diagonal: return "diag";
    case PatternKind::full: return "full";
  }
  return "?";
}

inline std::string to_string(LearnerKind k) {
  return k == LearnerKind::ogd ? "ogd" : "adagrad";
}

inline FeedbackKind parse_feedback(std::string_view s) {
  if (s == "ratio") return FeedbackKind::ratio;
  if (s == "hyper" || s == "hypergradient") return FeedbackKind::hypergradient;
  throw ConfigError("unknown feedback '" + std::string(s) + "'");
}

inline ActionKind parse_action(std::string_view s) {
  if (s == "vanilla") return ActionKind::vanilla;
  if (s == "monotone") return ActionKind::monotone;
  if (s == "lookahead") return ActionKind::lookahead;
  if (s == "monotone-lookahead" || s == "monotone_lookahead")
    return ActionKind::monotone_lookahead;
  throw ConfigError("unknown action '" + std::string(s) + "'");
}

inline PatternKind parse_pattern(std::string_view s) {
  if (s == "scalar") return PatternKind::scalar;
  if (s == "diag" || s == "diagonal") return PatternKind::diagonal;
  if (s == "full") return PatternKind::full;
  throw ConfigError("unknown pattern '" + std::string(s) + "'");
}

inline LearnerKind parse_learner(std::string_view s) {
  if (s == "ogd") return LearnerKind::ogd;
  if (s == "adagrad") return LearnerKind::adagrad;
  throw ConfigError("unknown learner '" + std::string(s) + "'");
}

inline bool is_monotone(ActionKind k) {
  return k == ActionKind::monotone || k == ActionKind::monotone_lookahead;
}

inline bool has_lookahead(ActionKind k) {
  return k == ActionKind::lookahead || k == ActionKind::monotone_lookahead;
}

}  // namespace osgm
