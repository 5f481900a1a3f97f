#pragma once

#include <optional>
#include <string>
#include <vector>

#include "armor/driver.hpp"

namespace armor {
namespace io {

// --- AMF: single-matrix binary file ("ARMF", f64 LE, row-major) ---

void write_amf(const std::string& path, const DenseMatrix& m);
DenseMatrix read_amf(const std::string& path);

/// Reads an AMF file, or a plain CSV of doubles when the path ends in ".csv".
DenseMatrix read_matrix_auto(const std::string& path);

// --- ARMC: factorization container ---

struct Container {
  FactorizationState state;    // core values hold zeros off-mask
  std::vector<double> r1, r2;  // normalization scalings; empty when absent
  bool has_scalings() const { return !r1.empty(); }
};

void write_container(const std::string& path, const FactorizationState& state,
                     const std::vector<double>& r1 = {},
                     const std::vector<double>& r2 = {});
Container read_container(const std::string& path);

// --- Trace CSV ---

void write_trace_csv(const std::string& path, const LossTrace& trace);
LossTrace read_trace_csv(const std::string& path);

/// Renders a trace CSV to a minimal SVG loss curve (one polyline per phase
/// series collapsed to trace order). log_scale plots log10 of the loss.
void write_trace_svg(const std::string& path, const LossTrace& trace,
                     bool log_scale);

}  // namespace io
}  // namespace armor
