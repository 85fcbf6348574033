#pragma once

// Parameter sweeps producing CSV rows. Points are independent and run on a
// small worker pool; rows come out in sweep order regardless of scheduling.

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <tuple>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "model_io.hpp"
#include "oracles.hpp"
#include "thermo.hpp"

namespace transferkit {

enum class SweepParameter { beta, L, gamma, distance };
enum class SweepQuantity { free_energy, energy, mi, cmi, error_vs_oracle };

inline std::string to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::beta: return "beta";
    case SweepParameter::L: return "L";
    case SweepParameter::gamma: return "gamma";
    case SweepParameter::distance: return "distance";
  }
  return "?";
}

inline std::string to_string(SweepQuantity q) {
  switch (q) {
    case SweepQuantity::free_energy: return "free_energy";
    case SweepQuantity::energy: return "energy";
    case SweepQuantity::mi: return "mi";
    case SweepQuantity::cmi: return "cmi";
    case SweepQuantity::error_vs_oracle: return "error_vs_oracle";
  }
  return "?";
}

inline SweepParameter parse_sweep_parameter(const std::string& s) {
  if (s == "beta") return SweepParameter::beta;
  if (s == "L") return SweepParameter::L;
  if (s == "gamma") return SweepParameter::gamma;
  if (s == "distance") return SweepParameter::distance;
  throw ArgumentError("unknown sweep parameter '" + s + "' (expected beta, L, gamma or distance)");
}

inline SweepQuantity parse_sweep_quantity(const std::string& s) {
  if (s == "free_energy") return SweepQuantity::free_energy;
  if (s == "energy") return SweepQuantity::energy;
  if (s == "mi") return SweepQuantity::mi;
  if (s == "cmi") return SweepQuantity::cmi;
  if (s == "error_vs_oracle") return SweepQuantity::error_vs_oracle;
  throw ArgumentError("unknown quantity '" + s + "'");
}

/// Where the chain comes from. `make(beta, gamma)` builds the model; gamma is
/// only meaningful for sources that depend on it (the built-in XY chain).
struct ModelSource {
  std::string label;
  std::function<ChainModel(double beta, double gamma)> make;
  /// Original sites per model site (2 for the blocked dimerized XY chain).
  int sites_per_cell = 1;
  std::optional<OracleSpec> oracle;
  bool depends_on_gamma = false;

  /// Exact free energy per original site, if an oracle is registered.
  std::optional<double> oracle_free_energy(double beta, double gamma) const {
    if (!oracle) return std::nullopt;
    if (oracle->model == "xy") return xy_exact(beta, depends_on_gamma ? gamma : oracle->gamma) / beta;
    return classical_transfer_free_energy(ising_model(oracle->coupling, beta));
  }
};

inline ModelSource source_from_file(const ModelFile& file) {
  ModelSource s;
  s.label = file.name.empty() ? "file" : file.name;
  s.make = [file](double beta, double) { return to_chain_model(file, beta); };
  s.sites_per_cell = file.blocking ? file.blocking->cell_size / 2 : 1;
  s.oracle = file.oracle;
  return s;
}

inline ModelSource zero_source(int d = 2) {
  return {"zero", [d](double beta, double) { return zero_model(d, beta); }, 1, std::nullopt, false};
}

inline ModelSource ising_source(double coupling) {
  return {"ising", [coupling](double beta, double) { return ising_model(coupling, beta); }, 1,
          OracleSpec{"ising", 1.0, coupling}, false};
}

/// XY chain with couplings alternating 1, gamma. With `blocked` the chain is
/// always the d = 4 two-spin-cell model (needed when gamma varies);
/// otherwise gamma = 1 uses the plain d = 2 chain.
inline ModelSource xy_source(double gamma, bool blocked) {
  ModelSource s;
  s.label = "xy";
  s.oracle = OracleSpec{"xy", gamma, 1.0};
  s.depends_on_gamma = true;
  if (blocked || gamma != 1.0) {
    s.make = [](double beta, double g) { return dimerized_xy_model(g, beta); };
    s.sites_per_cell = 2;
  } else {
    s.make = [](double beta, double) { return xy_model(beta); };
  }
  return s;
}

struct SweepSettings {
  double beta = 1.0;
  int L = 6;
  double gamma = 1.0;
  int distance = 1;
  SolverOptions solver{};
  DerivativeOptions derivative{};
  /// Record wall-clock time per point; off by default so output is
  /// byte-reproducible.
  bool timing = false;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct SweepSpec {
  SweepParameter parameter;
  std::vector<double> values;
  SweepSettings fixed{};

  void validate() const {
    if (values.empty()) throw ArgumentError("sweep: value list is empty");
    for (std::size_t i = 1; i < values.size(); ++i) {
      if (!(values[i] > values[i - 1])) throw ArgumentError("sweep: values must be strictly increasing");
    }
    if (parameter == SweepParameter::L || parameter == SweepParameter::distance) {
      for (double v : values) {
        if (v != std::floor(v)) throw ArgumentError("sweep: " + to_string(parameter) + " values must be integers");
      }
    }
  }
};

enum class PointStatus { ok, not_converged, resource, failed };

struct SweepRow {
  double param;
  std::optional<double> value;
  double residual;
  double wall_time;
  PointStatus status = PointStatus::ok;
  std::string error;
};

struct PointSettings {
  double beta;
  int L;
  double gamma;
  int distance;
};

inline PointSettings point_settings(const SweepSpec& spec, double v) {
  PointSettings p{spec.fixed.beta, spec.fixed.L, spec.fixed.gamma, spec.fixed.distance};
  switch (spec.parameter) {
    case SweepParameter::beta: p.beta = v; break;
    case SweepParameter::L: p.L = static_cast<int>(v); break;
    case SweepParameter::gamma: p.gamma = v; break;
    case SweepParameter::distance: p.distance = static_cast<int>(v); break;
  }
  return p;
}

/// Checks that the quantity makes sense for the source before any work.
inline void require_compatible(const ModelSource& source, const SweepSpec& spec, SweepQuantity q) {
  if (q == SweepQuantity::error_vs_oracle && !source.oracle) {
    throw ArgumentError("sweep: error_vs_oracle needs a model with a registered oracle");
  }
  if (spec.parameter == SweepParameter::gamma && !source.depends_on_gamma) {
    throw ArgumentError("sweep: model '" + source.label + "' has no gamma parameter");
  }
  if (spec.parameter == SweepParameter::distance && q != SweepQuantity::mi && q != SweepQuantity::cmi) {
    throw ArgumentError("sweep: a distance sweep needs quantity mi or cmi");
  }
}

/// Fold window for a two-sided quantity over L original sites: each folded
/// site holds two, so L = 10 gives a window of 5 and an 8-site marginal.
inline int two_sided_fold_window(int L) {
  if (L < 4 || L % 2 != 0) {
    throw ArgumentError("two-sided quantities need an even L >= 4 (original sites), got " + std::to_string(L));
  }
  return L / 2;
}

namespace detail {

inline void require_converged(const SpectralResult& s) {
  if (!s.converged) {
    throw ConvergenceError("power iteration stopped after " + std::to_string(s.iterations) +
                           " iterations with residual " + format_double(s.residual));
  }
}

/// Two-sided marginals are shared between points of a distance sweep.
class MarginalCache {
 public:
  const TwoSidedMarginal& get(const ChainModel& model, const PointSettings& p, const SolverOptions& options) {
    const Key key{p.beta, p.gamma, p.L};
    std::shared_ptr<Slot> slot;
    {
      std::lock_guard lock(mutex_);
      auto& s = slots_[key];
      if (!s) s = std::make_shared<Slot>();
      slot = s;
    }
    std::call_once(slot->once, [&] {
      const int fold = two_sided_fold_window(p.L);
      slot->value.emplace(two_sided_marginal(model, fold, fold - 1, options));
    });
    return *slot->value;
  }

 private:
  using Key = std::tuple<double, double, int>;
  struct Slot {
    std::once_flag once;
    std::optional<TwoSidedMarginal> value;
  };
  std::mutex mutex_;
  std::map<Key, std::shared_ptr<Slot>> slots_;
};

}  // namespace detail

/// Computes one sweep point. Returns {value, residual}.
inline std::pair<double, double> sweep_point(const ModelSource& source, SweepQuantity q, const PointSettings& p,
                                             const SweepSettings& settings, detail::MarginalCache& cache) {
  const ChainModel model = source.make(p.beta, p.gamma);
  const double per_site = source.sites_per_cell;
  switch (q) {
    case SweepQuantity::free_energy:
    case SweepQuantity::error_vs_oracle: {
      const FreeEnergyEstimate f = free_energy(model, p.L, settings.solver);
      detail::require_converged(f.spectral);
      const double value = f.value / per_site;
      if (q == SweepQuantity::free_energy) return {value, f.spectral.residual};
      return {std::abs(value - *source.oracle_free_energy(p.beta, p.gamma)), f.spectral.residual};
    }
    case SweepQuantity::energy: {
      const double norm = model.h_norm();
      if (norm == 0.0) return {0.0, 0.0};
      const ObservableEstimate e =
          expectation_by_derivative(model, model.term() / norm, p.L, settings.derivative);
      detail::require_converged(e.base.spectral);
      detail::require_converged(e.perturbed.spectral);
      return {e.value * norm / per_site, std::max(e.base.spectral.residual, e.perturbed.spectral.residual)};
    }
    case SweepQuantity::mi:
    case SweepQuantity::cmi: {
      const TwoSidedMarginal& m = cache.get(model, p, settings.solver);
      detail::require_converged(m.spectral);
      const auto [a, c] = pair_at_distance(m.state.n_sites(), p.distance);
      const double value = q == SweepQuantity::mi ? mutual_information(m.state, {a}, {c})
                                                  : conditional_mutual_information(m.state, {a}, {c});
      return {value, m.spectral.residual};
    }
  }
  throw ArgumentError("sweep: unhandled quantity");
}

inline std::vector<SweepRow> run_sweep(const ModelSource& source, const SweepSpec& spec, SweepQuantity q) {
  spec.validate();
  require_compatible(source, spec, q);
  std::vector<SweepRow> rows(spec.values.size());
  detail::MarginalCache cache;
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < rows.size(); i = next++) {
      SweepRow& row = rows[i];
      row.param = spec.values[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        const auto [value, residual] = sweep_point(source, q, point_settings(spec, row.param), spec.fixed, cache);
        row.value = value;
        row.residual = residual;
      } catch (const ConvergenceError& e) {
        row.status = PointStatus::not_converged;
        row.error = e.what();
      } catch (const ResourceError& e) {
        row.status = PointStatus::resource;
        row.error = e.what();
      } catch (const Error& e) {
        row.status = PointStatus::failed;
        row.error = e.what();
      } catch (const std::bad_alloc&) {
        row.status = PointStatus::resource;
        row.error = "out of memory";
      }
      if (row.status != PointStatus::ok) row.residual = std::numeric_limits<double>::infinity();
      row.wall_time = spec.fixed.timing
                          ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()
                          : 0.0;
    }
  };

  unsigned threads = spec.fixed.threads ? spec.fixed.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(rows.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

inline constexpr const char* kSweepHeader = "param,value,quantity,diagnostic_residual,wall_time_s";

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, SweepQuantity q) {
  out << kSweepHeader << '\n';
  for (const SweepRow& r : rows) {
    out << format_double(r.param) << ',' << (r.value ? format_double(*r.value) : std::string{}) << ','
        << to_string(q) << ',' << format_double(r.residual) << ',' << format_double(r.wall_time) << '\n';
  }
}

}  // namespace transferkit
