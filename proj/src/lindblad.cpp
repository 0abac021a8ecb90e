#include "trajembed/lindblad.hpp"

#include <cmath>

#include "trajembed/errors.hpp"
#include "trajembed/json_io.hpp"

namespace trajembed {

namespace {
constexpr double kHermTol = 1e-8;
constexpr double kEffTol = 1e-8;
}  // namespace

Matrix Lindblad::jump_sum() const {
  Matrix s = Matrix::Zero(dim(), dim());
  for (const Matrix& j : jumps) s += j.adjoint() * j;
  return s;
}

Matrix Lindblad::h_eff() const { return h - 0.5 * kImag * jump_sum(); }

void check_lindblad(const Lindblad& lb) {
  const int d = lb.dim();
  if (d < 1) throw DimensionMismatchError("model dimension must be positive");
  if (lb.h.cols() != d) {
    throw DimensionMismatchError("hamiltonian is not square");
  }
  if (max_abs(Matrix(lb.h - lb.h.adjoint())) > kHermTol) {
    throw NotHermitianError("hamiltonian deviates from Hermitian by more than " +
                            std::to_string(kHermTol));
  }
  if (lb.symbols.size() != lb.jumps.size()) {
    throw DimensionMismatchError("symbol list and jump list disagree");
  }
  for (std::size_t i = 0; i < lb.jumps.size(); ++i) {
    if (lb.jumps[i].rows() != d || lb.jumps[i].cols() != d) {
      throw DimensionMismatchError("jump operator '" + lb.symbols[i] +
                                   "' has the wrong shape");
    }
  }
  const std::size_t n_start = lb.start_labels.size();
  if (lb.start_weights.size() != n_start || lb.start_states.size() != n_start) {
    throw DimensionMismatchError("start ensemble fields disagree in length");
  }
  if (n_start > 0) {
    double total = 0.0;
    for (std::size_t i = 0; i < n_start; ++i) {
      if (lb.start_weights[i] < 0.0) {
        throw NonStochasticError("start weight of '" + lb.start_labels[i] +
                                 "' is negative");
      }
      total += lb.start_weights[i];
      if (lb.start_states[i].size() != d) {
        throw DimensionMismatchError("start state '" + lb.start_labels[i] +
                                     "' has the wrong dimension");
      }
      if (std::abs(lb.start_states[i].norm() - 1.0) > 1e-8) {
        throw BadDensityError("start state '" + lb.start_labels[i] +
                              "' is not unit norm");
      }
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw NonStochasticError("start weights sum to " + std::to_string(total));
    }
  }
}

nlohmann::json lindblad_to_json(const Lindblad& lb) {
  nlohmann::json j;
  j["kind"] = "lindblad";
  j["dim"] = lb.dim();
  j["symbols"] = lb.symbols;
  j["H"] = matrix_to_json(lb.h);
  j["H_eff"] = matrix_to_json(lb.h_eff());
  nlohmann::json jumps = nlohmann::json::object();
  for (std::size_t i = 0; i < lb.symbols.size(); ++i) {
    jumps[lb.symbols[i]] = matrix_to_json(lb.jumps[i]);
  }
  j["jumps"] = jumps;
  if (!lb.start_labels.empty()) {
    nlohmann::json start = nlohmann::json::array();
    for (std::size_t i = 0; i < lb.start_labels.size(); ++i) {
      start.push_back({{"label", lb.start_labels[i]},
                       {"weight", lb.start_weights[i]},
                       {"state", vector_to_json(lb.start_states[i])}});
    }
    j["start"] = start;
  }
  return j;
}

Lindblad lindblad_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("kind", "") != "lindblad") {
    throw ValidationError("document is not a lindblad model");
  }
  Lindblad lb;
  lb.h = matrix_from_json(j.at("H"));
  if (!j.contains("symbols") || !j.at("symbols").is_array()) {
    throw ValidationError("lindblad model lacks a symbols array");
  }
  for (const auto& s : j.at("symbols")) {
    lb.symbols.push_back(s.get<std::string>());
  }
  const auto& jumps = j.at("jumps");
  for (const std::string& sym : lb.symbols) {
    if (!jumps.contains(sym)) {
      throw ValidationError("missing jump operator for symbol '" + sym + "'");
    }
    lb.jumps.push_back(matrix_from_json(jumps.at(sym)));
  }
  if (j.contains("start")) {
    for (const auto& s : j.at("start")) {
      lb.start_labels.push_back(s.at("label").get<std::string>());
      lb.start_weights.push_back(s.at("weight").get<double>());
      lb.start_states.push_back(vector_from_json(s.at("state")));
    }
  }
  check_lindblad(lb);
  if (j.contains("dim") && j.at("dim").get<int>() != lb.dim()) {
    throw DimensionMismatchError("declared dim disagrees with matrices");
  }
  if (j.contains("H_eff")) {
    const Matrix stored = matrix_from_json(j.at("H_eff"));
    if (stored.rows() != lb.dim() || stored.cols() != lb.dim() ||
        max_abs_diff(stored, lb.h_eff()) > kEffTol) {
      throw ValidationError(
          "stored effective Hamiltonian is inconsistent with H and the jumps");
    }
  }
  return lb;
}

}  // namespace trajembed
