#pragma once

// JSON model files and density-matrix dumps.
//
// Model file:
//   {
//     "name": "xy",                         (optional)
//     "d": 2,
//     "h": [[[re, im], ...], ...],          d^2 x d^2, row-major
//     "blocking": {                          (optional, replaces "h")
//       "cell_size": 4,
//       "terms": [matrix, matrix]            bonds of one cell, d^2 x d^2 each
//     },
//     "oracle": {"model": "xy", "gamma": 1}  (optional)
//   }
//
// Doubles are written in shortest round-trip form, so a write/read cycle
// reproduces every entry bit for bit.

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "chain_model.hpp"
#include "density_matrix.hpp"

namespace transferkit {

using json = nlohmann::json;

struct BlockingSpec {
  int cell_size;
  std::vector<ComplexMatrix> terms;
};

struct OracleSpec {
  std::string model;  // "xy" or "ising"
  double gamma = 1.0;
  double coupling = 1.0;
};

struct ModelFile {
  std::string name;
  /// Local dimension of the (unblocked) sites.
  int d = 2;
  ComplexMatrix h;
  std::optional<BlockingSpec> blocking;
  std::optional<OracleSpec> oracle;
};

inline json matrix_to_json(const ComplexMatrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline ComplexMatrix matrix_from_json(const json& j, std::string_view what) {
  if (!j.is_array() || j.empty()) throw MalformedInput(std::string(what) + ": expected a non-empty array of rows");
  const auto n = static_cast<Index>(j.size());
  ComplexMatrix m(n, n);
  for (Index r = 0; r < n; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Index>(row.size()) != n) {
      throw MalformedInput(std::string(what) + ": row " + std::to_string(r) + " does not have " + std::to_string(n) +
                           " entries");
    }
    for (Index c = 0; c < n; ++c) {
      const json& e = row[static_cast<std::size_t>(c)];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        throw MalformedInput(std::string(what) + ": entry (" + std::to_string(r) + "," + std::to_string(c) +
                             ") is not a [re, im] pair");
      }
      m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
    }
  }
  return m;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MalformedInput("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedInput("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline ModelFile parse_model(const json& j) {
  if (!j.is_object()) throw MalformedInput("model file: top level must be an object");
  ModelFile model;
  try {
    model.name = j.value("name", std::string{});
    if (!j.contains("d") || !j["d"].is_number_integer()) throw MalformedInput("model file: missing integer 'd'");
    model.d = j["d"].get<int>();
    if (model.d < 2) throw MalformedInput("model file: 'd' must be >= 2");
    const Index pair = static_cast<Index>(model.d) * model.d;
    if (j.contains("blocking")) {
      const json& b = j["blocking"];
      if (!b.is_object() || !b.contains("cell_size") || !b.contains("terms") || !b["terms"].is_array()) {
        throw MalformedInput("model file: 'blocking' needs 'cell_size' and 'terms'");
      }
      BlockingSpec spec{b["cell_size"].get<int>(), {}};
      for (const json& t : b["terms"]) {
        ComplexMatrix m = matrix_from_json(t, "blocking term");
        if (m.rows() != pair) throw MalformedInput("model file: blocking terms must be d^2 x d^2");
        spec.terms.push_back(std::move(m));
      }
      model.blocking = std::move(spec);
    } else {
      if (!j.contains("h")) throw MalformedInput("model file: missing 'h'");
      model.h = matrix_from_json(j["h"], "h");
      if (model.h.rows() != pair) {
        throw MalformedInput("model file: 'h' is " + std::to_string(model.h.rows()) + "x" +
                             std::to_string(model.h.rows()) + ", expected d^2 = " + std::to_string(pair));
      }
    }
    if (j.contains("oracle")) {
      const json& o = j["oracle"];
      OracleSpec spec;
      spec.model = o.at("model").get<std::string>();
      spec.gamma = o.value("gamma", 1.0);
      spec.coupling = o.value("J", 1.0);
      if (spec.model != "xy" && spec.model != "ising") {
        throw MalformedInput("model file: unknown oracle '" + spec.model + "'");
      }
      model.oracle = spec;
    }
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("model file: ") + e.what());
  }
  return model;
}

inline ModelFile read_model_file(const std::string& path) { return parse_model(read_json_file(path)); }

inline json model_to_json(const ModelFile& model) {
  json j;
  if (!model.name.empty()) j["name"] = model.name;
  j["d"] = model.d;
  if (model.blocking) {
    json terms = json::array();
    for (const auto& t : model.blocking->terms) terms.push_back(matrix_to_json(t));
    j["blocking"] = {{"cell_size", model.blocking->cell_size}, {"terms", std::move(terms)}};
  } else {
    j["h"] = matrix_to_json(model.h);
  }
  if (model.oracle) {
    j["oracle"] = {{"model", model.oracle->model}, {"gamma", model.oracle->gamma}, {"J", model.oracle->coupling}};
  }
  return j;
}

/// Chain model at inverse temperature beta; throws NotHermitianError for a
/// non-Hermitian term.
inline ChainModel to_chain_model(const ModelFile& model, double beta) {
  if (model.blocking) return block_sites(model.blocking->terms, model.blocking->cell_size, beta);
  return ChainModel(model.d, model.h, beta);
}

inline json density_matrix_to_json(const DensityMatrix& rho) {
  const RealVector ev = hermitian_eigenvalues(rho.matrix());
  json j;
  j["d"] = rho.local_dim();
  j["n_sites"] = rho.n_sites();
  j["rho"] = matrix_to_json(rho.matrix());
  j["eigenvalues"] = std::vector<double>(ev.data(), ev.data() + ev.size());
  return j;
}

inline DensityMatrix density_matrix_from_json(const json& j) {
  try {
    const int d = j.at("d").get<int>();
    const int n = j.at("n_sites").get<int>();
    ComplexMatrix m = matrix_from_json(j.at("rho"), "rho");
    if (m.rows() != detail::site_dim(d, n)) throw MalformedInput("density matrix: dimension does not match d^n_sites");
    return DensityMatrix(std::move(m), n, d);
  } catch (const json::exception& e) {
    throw MalformedInput(std::string("density matrix: ") + e.what());
  }
}

/// printf("%.17g"): 17 significant digits.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace transferkit
