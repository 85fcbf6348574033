// transferkit: free energy, marginals and sweeps for translation-invariant
// nearest-neighbour chains.
//
// Exit codes: 0 ok, 1 comparison over tolerance, 2 malformed or incompatible
// input, 3 non-Hermitian h, 4 no convergence, 5 resource budget, 6 k >= L.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <transferkit/transferkit.hpp>

using namespace transferkit;

namespace {

enum Exit : int {
  kOk = 0,
  kOverTolerance = 1,
  kBadInput = 2,
  kNotHermitian = 3,
  kNoConvergence = 4,
  kResource = 5,
  kMarginalTooLarge = 6,
};

class MarginalSizeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

struct ModelArgs {
  std::string ref;
  double J = 1.0;
  double gamma = 1.0;
  int d = 2;
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--model", m.ref, "model JSON file, or builtin:zero | builtin:ising | builtin:xy")->required();
  cmd->add_option("--J", m.J, "coupling of builtin:ising");
  cmd->add_option("--gamma", m.gamma, "dimerization of builtin:xy (couplings alternate 1, gamma)");
  cmd->add_option("--d", m.d, "local dimension of builtin:zero")->check(CLI::PositiveNumber);
}

ModelSource resolve_model(const ModelArgs& m, bool force_blocked_xy = false) {
  if (m.ref == "builtin:zero") {
    if (m.d < 2) throw ArgumentError("--d must be >= 2");
    return zero_source(m.d);
  }
  if (m.ref == "builtin:ising") return ising_source(m.J);
  if (m.ref == "builtin:xy") {
    if (!(m.gamma >= 0.0)) throw ArgumentError("--gamma must be >= 0");
    return xy_source(m.gamma, force_blocked_xy);
  }
  if (m.ref.rfind("builtin:", 0) == 0) throw ArgumentError("unknown builtin model '" + m.ref + "'");
  const ModelFile file = read_model_file(m.ref);
  // reject a bad h here rather than once per sweep point
  to_chain_model(file, 1.0);
  return source_from_file(file);
}

SolverOptions solver_options(double tol, int max_iter) {
  if (!(tol > 0.0)) throw ArgumentError("--tol must be positive");
  SolverOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  return o;
}

void require_beta(double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("--beta must be positive and finite");
}

void require_converged(const SpectralResult& s) {
  if (!s.converged) {
    throw ConvergenceError("power iteration did not converge: " + std::to_string(s.iterations) +
                           " iterations, residual " + format_double(s.residual));
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out << text;
}

// ---------------------------------------------------------------------------

struct FreeEnergyArgs {
  ModelArgs model;
  double beta = 1.0;
  int L = 0;
  double epsilon = 0.0;
  std::string format = "table";
  double tol = 1e-12;
  int max_iter = 0;
};

int run_free_energy(const FreeEnergyArgs& a) {
  require_beta(a.beta);
  const ModelSource source = resolve_model(a.model);
  const ChainModel model = source.make(a.beta, a.model.gamma);
  int L = a.L;
  if (a.epsilon != 0.0) {
    ChooseLOptions opt;
    opt.max_L = max_window_for_budget(model.local_dim(), memory_budget_bytes());
    L = choose_L(a.epsilon, opt);
  }
  const FreeEnergyEstimate f = free_energy(model, L, solver_options(a.tol, a.max_iter));
  const double per_site = f.value / source.sites_per_cell;
  if (!f.within_envelope()) {
    std::cerr << "warning: estimate " << format_double(f.value) << " lies outside +-(||h|| + log d / beta) = "
              << format_double(f.envelope) << "; the window L = " << L << " is too small for this beta ||h||\n";
  }
  if (a.format == "csv") {
    std::cout << "f,L,beta,residual,iterations,converged,wall_time_s\n"
              << format_double(per_site) << ',' << L << ',' << format_double(a.beta) << ','
              << format_double(f.spectral.residual) << ',' << f.spectral.iterations << ','
              << (f.spectral.converged ? 1 : 0) << ',' << format_double(f.wall_time) << '\n';
  } else {
    std::cout << "free energy per site  " << format_double(per_site) << '\n'
              << "L                     " << L << '\n'
              << "beta                  " << format_double(a.beta) << '\n'
              << "spectral radius       " << format_double(f.spectral.radius) << '\n'
              << "residual              " << format_double(f.spectral.residual) << '\n'
              << "iterations            " << f.spectral.iterations << '\n'
              << "converged             " << (f.spectral.converged ? "yes" : "no") << '\n'
              << "wall time (s)         " << format_double(f.wall_time) << '\n';
  }
  require_converged(f.spectral);
  return kOk;
}

// ---------------------------------------------------------------------------

struct MarginalArgs {
  ModelArgs model;
  double beta = 1.0;
  int L = 0;
  int k = 0;
  bool two_sided = false;
  std::string out;
  double tol = 1e-12;
  int max_iter = 0;
};

int run_marginal(const MarginalArgs& a) {
  require_beta(a.beta);
  if (a.k >= a.L) {
    throw MarginalSizeError("marginal: k = " + std::to_string(a.k) + " must be smaller than L = " +
                            std::to_string(a.L));
  }
  const ModelSource source = resolve_model(a.model);
  const ChainModel model = source.make(a.beta, a.model.gamma);
  const SolverOptions solver = solver_options(a.tol, a.max_iter);
  json dump;
  double projection = 0.0;
  if (a.two_sided) {
    // L and k count sites of the two-sided chain; both are split evenly
    // around the fold.
    const int fold = two_sided_fold_window(a.L);
    if (a.k < 2 || a.k % 2 != 0) throw ArgumentError("--two-sided needs an even k >= 2");
    const TwoSidedMarginal m = two_sided_marginal(model, fold, a.k / 2, solver);
    require_converged(m.spectral);
    dump = density_matrix_to_json(m.state);
    projection = m.projection_distance;
  } else {
    const MarginalResult m = gibbs_marginal_with_diagnostics(model, a.L, a.k, solver);
    require_converged(m.spectral);
    dump = density_matrix_to_json(m.state);
    projection = m.projection_distance;
  }
  dump["L"] = a.L;
  dump["beta"] = a.beta;
  dump["two_sided"] = a.two_sided;
  dump["projection_distance"] = projection;
  write_text(a.out, dump.dump(1) + "\n");
  const auto& ev = dump["eigenvalues"];
  std::cerr << "marginal on " << dump["n_sites"].get<int>() << " sites: eigenvalues in ["
            << format_double(ev.front().get<double>()) << ", " << format_double(ev.back().get<double>())
            << "], projection distance " << format_double(projection) << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    // a:b:n expands to n evenly spaced points from a to b
    if (std::count(item.begin(), item.end(), ':') == 2) {
      const auto c1 = item.find(':');
      const auto c2 = item.find(':', c1 + 1);
      const double lo = std::stod(item.substr(0, c1));
      const double hi = std::stod(item.substr(c1 + 1, c2 - c1 - 1));
      const int n = std::stoi(item.substr(c2 + 1));
      if (n < 2) throw ArgumentError("range '" + item + "' needs at least 2 points");
      for (int i = 0; i < n; ++i) values.push_back(lo + (hi - lo) * i / (n - 1));
      continue;
    }
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw ArgumentError("bad sweep value '" + item + "'");
    values.push_back(v);
  }
  return values;
}

struct SweepArgs {
  ModelArgs model;
  std::string param;
  std::string values;
  std::string quantity = "free_energy";
  double beta = 1.0;
  int L = 6;
  int distance = 1;
  unsigned threads = 0;
  bool timing = false;
  std::string out;
  double tol = 1e-12;
  int max_iter = 0;
  double second_derivative_bound = 10.0;
};

int run_sweep_cmd(const SweepArgs& a) {
  SweepSpec spec;
  try {
    spec.parameter = parse_sweep_parameter(a.param);
    spec.values = parse_values(a.values);
  } catch (const std::logic_error& e) {
    throw ArgumentError(std::string("--values: ") + e.what());
  }
  const SweepQuantity q = parse_sweep_quantity(a.quantity);
  spec.fixed.beta = a.beta;
  spec.fixed.L = a.L;
  spec.fixed.gamma = a.model.gamma;
  spec.fixed.distance = a.distance;
  spec.fixed.solver = solver_options(a.tol, a.max_iter);
  spec.fixed.derivative.solver = spec.fixed.solver;
  spec.fixed.derivative.second_derivative_bound = a.second_derivative_bound;
  spec.fixed.timing = a.timing;
  spec.fixed.threads = a.threads;
  if (spec.parameter != SweepParameter::beta) require_beta(a.beta);
  if (spec.parameter == SweepParameter::beta) {
    for (double b : spec.values) require_beta(b);
  }
  const ModelSource source = resolve_model(a.model, spec.parameter == SweepParameter::gamma);
  const std::vector<SweepRow> rows = run_sweep(source, spec, q);

  std::ostringstream csv;
  write_sweep_csv(csv, rows, q);
  write_text(a.out, csv.str());

  int code = kOk;
  for (const SweepRow& r : rows) {
    if (r.status == PointStatus::ok) continue;
    std::cerr << to_string(spec.parameter) << " = " << format_double(r.param) << ": " << r.error << '\n';
    if (code != kOk) continue;
    code = r.status == PointStatus::not_converged ? kNoConvergence
           : r.status == PointStatus::resource    ? kResource
                                                  : kBadInput;
  }
  return code;
}

// ---------------------------------------------------------------------------

int run_oracle_xy(double beta, double gamma, bool validate) {
  if (!(beta >= 0.0) || !(gamma >= 0.0)) throw ArgumentError("oracle xy: need beta >= 0 and gamma >= 0");
  const double bf = xy_exact(beta, gamma);
  std::cout << "model,beta,gamma,beta_f,f,energy_per_site\n"
            << "xy," << format_double(beta) << ',' << format_double(gamma) << ',' << format_double(bf) << ','
            << (beta > 0.0 ? format_double(bf / beta) : std::string{}) << ','
            << format_double(xy_exact_energy(beta, gamma)) << '\n';
  if (validate) {
    const XyValidation v = validate_xy_exact(beta, gamma);
    std::cerr << "extrapolated exact diagonalization " << format_double(v.extrapolated) << ", discrepancy "
              << format_double(v.discrepancy) << '\n';
  }
  return kOk;
}

int run_oracle_ising(double beta, double coupling) {
  require_beta(beta);
  const double f = classical_transfer_free_energy(ising_model(coupling, beta));
  std::cout << "model,beta,J,beta_f,f\n"
            << "ising," << format_double(beta) << ',' << format_double(coupling) << ',' << format_double(beta * f)
            << ',' << format_double(f) << '\n';
  return kOk;
}

int run_oracle_ed(const ModelArgs& m, double beta, int N) {
  require_beta(beta);
  const ModelSource source = resolve_model(m);
  const FiniteChainResult r = exact_diag_free_energy(source.make(beta, m.gamma), N);
  std::cout << "N,beta,log_Z,f\n"
            << N << ',' << format_double(beta) << ',' << format_double(r.log_Z) << ','
            << format_double(r.f_per_site / source.sites_per_cell) << '\n';
  return kOk;
}

int run_oracle_marginal(const ModelArgs& m, double beta, int L, int chain, const std::string& out) {
  require_beta(beta);
  const ModelSource source = resolve_model(m);
  const DensityMatrix rho = gibbs_marginal_bruteforce(source.make(beta, m.gamma), L, chain);
  json dump = density_matrix_to_json(rho);
  dump["L"] = L;
  dump["m"] = chain;
  dump["beta"] = beta;
  write_text(out, dump.dump(1) + "\n");
  return kOk;
}

// ---------------------------------------------------------------------------

int run_compare(const std::string& a, const std::string& b, double tol) {
  const DensityMatrix x = density_matrix_from_json(read_json_file(a));
  const DensityMatrix y = density_matrix_from_json(read_json_file(b));
  if (x.dim() != y.dim() || x.n_sites() != y.n_sites()) {
    throw ArgumentError("compare: states have different shapes (" + std::to_string(x.n_sites()) + " vs " +
                        std::to_string(y.n_sites()) + " sites)");
  }
  const double dist = trace_distance(x.matrix(), y.matrix());
  std::cout << "trace_distance,tolerance,within\n"
            << format_double(dist) << ',' << format_double(tol) << ',' << (dist <= tol ? 1 : 0) << '\n';
  return dist <= tol ? kOk : kOverTolerance;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Free energy and Gibbs marginals of infinite 1D chains via the noncommutative transfer map"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "transferkit 0.1.0");

  FreeEnergyArgs fe;
  CLI::App* fe_cmd = app.add_subcommand("free-energy", "free energy per site of the infinite chain");
  add_model_options(fe_cmd, fe.model);
  fe_cmd->add_option("--beta", fe.beta, "inverse temperature")->required();
  auto* fe_L = fe_cmd->add_option("--L", fe.L, "window size")->check(CLI::Range(2, 64));
  auto* fe_eps = fe_cmd->add_option("--epsilon", fe.epsilon, "target accuracy; picks L automatically");
  fe_L->excludes(fe_eps);
  fe_cmd->add_option("--format", fe.format, "table or csv")->check(CLI::IsMember({"table", "csv"}));
  fe_cmd->add_option("--tol", fe.tol, "power iteration tolerance");
  fe_cmd->add_option("--max-iter", fe.max_iter, "power iteration cap (0: automatic)");

  MarginalArgs mg;
  CLI::App* mg_cmd = app.add_subcommand("marginal", "Gibbs marginal on k sites (JSON)");
  add_model_options(mg_cmd, mg.model);
  mg_cmd->add_option("--beta", mg.beta, "inverse temperature")->required();
  mg_cmd->add_option("--L", mg.L, "window size")->required()->check(CLI::Range(2, 64));
  mg_cmd->add_option("--k", mg.k, "number of sites")->required()->check(CLI::PositiveNumber);
  mg_cmd->add_flag("--two-sided", mg.two_sided, "marginal of the two-sided chain (L, k count its sites)");
  mg_cmd->add_option("--out", mg.out, "output file (default stdout)");
  mg_cmd->add_option("--tol", mg.tol, "power iteration tolerance");
  mg_cmd->add_option("--max-iter", mg.max_iter, "power iteration cap (0: automatic)");

  SweepArgs sw;
  CLI::App* sw_cmd = app.add_subcommand("sweep", "CSV over a parameter sweep");
  add_model_options(sw_cmd, sw.model);
  sw_cmd->add_option("--param", sw.param, "beta, L, gamma or distance")->required();
  sw_cmd->add_option("--values", sw.values, "comma separated list; a:b:n for n evenly spaced points")->required();
  sw_cmd->add_option("--quantity", sw.quantity, "free_energy, energy, mi, cmi or error_vs_oracle");
  sw_cmd->add_option("--beta", sw.beta, "inverse temperature when not swept");
  sw_cmd->add_option("--L", sw.L, "window size when not swept (two-sided quantities: chain sites)");
  sw_cmd->add_option("--distance", sw.distance, "site separation for mi and cmi");
  sw_cmd->add_option("--threads", sw.threads, "worker threads (0: all cores)");
  sw_cmd->add_flag("--timing", sw.timing, "record wall time per point (output is then not reproducible)");
  sw_cmd->add_option("--out", sw.out, "output file (default stdout)");
  sw_cmd->add_option("--tol", sw.tol, "power iteration tolerance");
  sw_cmd->add_option("--max-iter", sw.max_iter, "power iteration cap (0: automatic)");
  sw_cmd->add_option("--second-derivative-bound", sw.second_derivative_bound,
                     "bound on |f''| used to pick the finite-difference step for energy");

  CLI::App* or_cmd = app.add_subcommand("oracle", "reference values");
  or_cmd->require_subcommand(1);
  double or_beta = 1.0, or_gamma = 1.0, or_J = 1.0;
  bool or_validate = false;
  CLI::App* or_xy = or_cmd->add_subcommand("xy", "free-fermion beta f of the dimerized XY chain");
  or_xy->add_option("--beta", or_beta)->required();
  or_xy->add_option("--gamma", or_gamma);
  or_xy->add_flag("--validate", or_validate, "cross-check against extrapolated exact diagonalization");
  CLI::App* or_ising = or_cmd->add_subcommand("ising", "classical Ising chain");
  or_ising->add_option("--beta", or_beta)->required();
  or_ising->add_option("--J", or_J);
  ModelArgs ed_model;
  int ed_N = 10;
  CLI::App* or_ed = or_cmd->add_subcommand("ed", "exact diagonalization of the open N-site chain");
  add_model_options(or_ed, ed_model);
  or_ed->add_option("--beta", or_beta)->required();
  or_ed->add_option("--N", ed_N)->required();
  ModelArgs bm_model;
  int bm_L = 4, bm_m = 12;
  std::string bm_out;
  CLI::App* or_marg = or_cmd->add_subcommand("marginal", "brute-force finite-chain marginal rho_{L,m} (JSON)");
  add_model_options(or_marg, bm_model);
  or_marg->add_option("--beta", or_beta)->required();
  or_marg->add_option("--L", bm_L, "marginal on sites 1..L-1")->required();
  or_marg->add_option("--m", bm_m, "chain length")->required();
  or_marg->add_option("--out", bm_out, "output file (default stdout)");

  std::string cmp_a, cmp_b;
  double cmp_tol = 1e-4;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "trace distance between two marginal dumps");
  cmp_cmd->add_option("first", cmp_a)->required();
  cmp_cmd->add_option("second", cmp_b)->required();
  cmp_cmd->add_option("--tol", cmp_tol, "exit 1 when the distance exceeds this");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kBadInput;
  }

  try {
    if (*fe_cmd) {
      if (fe.L == 0 && fe.epsilon == 0.0) throw ArgumentError("free-energy: give exactly one of --L or --epsilon");
      return run_free_energy(fe);
    }
    if (*mg_cmd) return run_marginal(mg);
    if (*sw_cmd) return run_sweep_cmd(sw);
    if (*or_xy) return run_oracle_xy(or_beta, or_gamma, or_validate);
    if (*or_ising) return run_oracle_ising(or_beta, or_J);
    if (*or_ed) return run_oracle_ed(ed_model, or_beta, ed_N);
    if (*or_marg) return run_oracle_marginal(bm_model, or_beta, bm_L, bm_m, bm_out);
    if (*cmp_cmd) return run_compare(cmp_a, cmp_b, cmp_tol);
  } catch (const MarginalSizeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kMarginalTooLarge;
  } catch (const NotHermitianError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNotHermitian;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const NumericalBreakdown& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const ResourceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kResource;
  } catch (const OracleMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOverTolerance;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kBadInput;
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kResource;
  }
  return kBadInput;
}
