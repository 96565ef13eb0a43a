#pragma once

#include <stdexcept>
#include <string>

namespace zrp {

// Series did not reach its tail bound within the probed depth; the
// fugacity is outside the working radius.
struct NonConvergent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested value outside the working range (density above R(phi_max),
// rate-function access past probe depth, ...).
struct OutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Legendre objective still increasing at the end of the search grid.
struct UnboundedSup : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Environment law failed validation (marginal not a density, ...).
struct BadLaw : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Zero total rate: no jump can occur.
struct Frozen : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Path weight requested but the event log was not retained.
struct MissingEvents : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BlockTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numeric derivative of Phi came out nonpositive inside the solver.
struct DegenerateStep : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Experiment configuration invalid; message names the offending key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A model hypothesis failed the pre-run gate; message names it.
struct HypothesisViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace zrp
