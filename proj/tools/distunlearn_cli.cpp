// distunlearn: command-line front end.
//
//   distunlearn frontier   CONFIG   frontier values or achieved (alpha, epsilon) pairs
//   distunlearn bounds     CONFIG   guarantee bounds or budgets over a parameter grid
//   distunlearn simulate   CONFIG   Gaussian deletion sweeps
//   distunlearn score      CONFIG   per-row deletion scores for a dataset
//   distunlearn experiment CONFIG   full dataset sweeps
//
// Exit status: 0 on success, 1 when a sweep has failed cells (unless
// --allow-partial), 2 on configuration or input errors.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "distunlearn/bounds.hpp"
#include "distunlearn/config.hpp"
#include "distunlearn/emit.hpp"
#include "distunlearn/frontier.hpp"
#include "distunlearn/gaussian.hpp"
#include "distunlearn/mechanisms.hpp"
#include "distunlearn/sweep.hpp"

using namespace distunlearn;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::string> format;
  bool allow_partial = false;

  Config load() const {
    Config c = config_path.empty() ? Config{} : Config::from_file(config_path);
    for (const auto& o : overrides) c.set(o);
    return c;
  }
};

std::string out_path(const Common& cli, const Config& c, const std::string& section) {
  return cli.output.value_or(c.str(section, "output", "-"));
}

OutputFormat out_format(const Common& cli, const Config& c, const std::string& section) {
  return parse_format(cli.format.value_or(c.str(section, "format", "csv")));
}

int run_frontier(const Common& cli) {
  const Config c = cli.load();
  const auto mode = c.str("frontier", "mode", "frontier");
  const auto family = c.str("frontier", "family", "gaussian");
  Table t;
  if (mode == "pairs") {
    // achieved (alpha, epsilon) of p = N(mu, sigma^2) against p1 = N(mu1, .), p2 = N(mu2, .)
    const double mu1 = c.real("frontier", "mu1", 0.0), mu2 = c.real("frontier", "mu2", 2.0);
    const double sigma = c.real("frontier", "sigma", 1.0);
    const auto p1 = GaussianModel::univariate(mu1, sigma * sigma);
    const auto p2 = GaussianModel::univariate(mu2, sigma * sigma);
    const double d = kl_gaussian(p1, p2);
    t.columns = {"mu", "alpha", "epsilon", "frontier_epsilon", "dominated"};
    for (double mu : parse_real_list(c.str("frontier", "mu_grid", "-4:6:0.01"), c.where("frontier", "mu_grid"))) {
      const auto p = GaussianModel::univariate(mu, sigma * sigma);
      const double a = kl_gaussian(p1, p), e = kl_gaussian(p2, p);
      t.add_row({mu, a, e, frontier_gaussian(d, a).epsilon, a < d});
    }
  } else if (mode == "frontier") {
    std::optional<ExpFamilySpec> spec;
    double d = 0.0;
    if (family == "gaussian") {
      if (const auto dv = c.get("frontier", "divergence")) {
        d = parse_double(*dv, c.where("frontier", "divergence"));
      } else {
        const double sigma = c.real("frontier", "sigma", 1.0);
        const double gap = c.real("frontier", "mu2", 2.0) - c.real("frontier", "mu1", 0.0);
        d = 0.5 * gap * gap / (sigma * sigma);
      }
    } else if (family == "bernoulli") {
      spec = make_bernoulli_family(c.real("frontier", "q1", 0.2), c.real("frontier", "q2", 0.6));
      d = bregman_kl(*spec, spec->theta1, spec->theta2);
    } else {
      throw std::invalid_argument(c.where("frontier", "family") + ": expected gaussian or bernoulli");
    }
    std::vector<double> alphas;
    if (const auto a = c.get("frontier", "alphas")) {
      alphas = parse_real_list(*a, c.where("frontier", "alphas"));
    } else {
      for (double m : parse_real_list(c.str("frontier", "alpha_multipliers", "0.5,1,1.01,1.5,2,4,10"),
                                      c.where("frontier", "alpha_multipliers"))) {
        alphas.push_back(m * d);
      }
    }
    t.columns = {"family", "divergence_d", "alpha", "epsilon", "dominated", "lambda_star", "residual",
                 "stationarity_residual"};
    for (double a : alphas) {
      if (!spec) {
        const auto p = frontier_gaussian(d, a);
        t.add_row({family, d, a, p.epsilon, p.dominated, Cell{}, Cell{}, Cell{}});
      } else {
        const auto p = frontier_expfamily(*spec, a);
        t.add_row({family, d, a, p.point.epsilon, p.point.dominated, p.lambda_star, p.residual,
                   p.stationarity_residual});
      }
    }
  } else {
    throw std::invalid_argument(c.where("frontier", "mode") + ": expected frontier or pairs");
  }
  emit(t, out_format(cli, c, "frontier"), out_path(cli, c, "frontier"));
  return 0;
}

int run_bounds(const Common& cli) {
  const Config c = cli.load();
  const auto mode = c.str("bounds", "mode", "bounds");
  std::vector<Mechanism> mechs;
  for (const auto& m : split_list(c.str("bounds", "mechanisms", "random,selective"))) {
    if (m == "random") {
      mechs.push_back(Mechanism::Random);
    } else if (m == "selective") {
      mechs.push_back(Mechanism::Selective);
    } else {
      throw std::invalid_argument(c.where("bounds", "mechanisms") + ": unknown mechanism '" + m + "'");
    }
  }
  const auto n1s = parse_int_list(c.str("bounds", "n1", "1000"), c.where("bounds", "n1"));
  const auto n2s = parse_int_list(c.str("bounds", "n2", "1000"), c.where("bounds", "n2"));
  const auto deltas = parse_real_list(c.str("bounds", "delta", "0.1"), c.where("bounds", "delta"));
  const auto divs = parse_real_list(c.str("bounds", "divergence", "0.125"), c.where("bounds", "divergence"));
  Table t;
  if (mode == "bounds") {
    t.columns = {"mechanism", "n1", "n2", "f", "delta", "divergence_d", "alpha_lower", "epsilon_upper",
                 "applicable", "vacuous"};
    for (auto m : mechs)
      for (auto n1 : n1s)
        for (auto n2 : n2s)
          for (double delta : deltas)
            for (double d : divs) {
              std::vector<std::uint64_t> fs;
              if (const auto f = c.get("bounds", "f")) {
                fs = parse_int_list(*f, c.where("bounds", "f"));
              } else {
                for (double fr : parse_real_list(c.str("bounds", "f_fractions", "0:1:0.05"), c.where("bounds", "f_fractions")))
                  fs.push_back(static_cast<std::uint64_t>(std::llround(fr * static_cast<double>(n1))));
              }
              for (auto f : fs) {
                const auto b = bound_for(m, n1, n2, f, delta, d);
                t.add_row({std::string(to_string(m)), static_cast<std::int64_t>(n1), static_cast<std::int64_t>(n2),
                           static_cast<std::int64_t>(f), delta, d, b.alpha_lower, b.epsilon_upper, b.applicable,
                           b.vacuous});
              }
            }
  } else if (mode == "budgets") {
    const auto alphas = parse_real_list(c.require("bounds", "alphas"), c.where("bounds", "alphas"));
    const auto epsilons = parse_real_list(c.require("bounds", "epsilons"), c.where("bounds", "epsilons"));
    t.columns = {"mechanism", "n1", "n2", "delta", "divergence_d", "target_alpha", "target_epsilon", "f",
                 "applicable", "inapplicable_reason", "removal_term", "preservation_term", "floor_term", "binding",
                 "closed_form_insufficient"};
    for (auto m : mechs)
      for (auto n1 : n1s)
        for (auto n2 : n2s)
          for (double delta : deltas)
            for (double d : divs)
              for (double a : alphas)
                for (double e : epsilons) {
                  const auto r = m == Mechanism::Random ? budget_random(n1, n2, delta, d, a, e)
                                                        : budget_selective(n1, n2, delta, d, a, e);
                  t.add_row({std::string(to_string(m)), static_cast<std::int64_t>(n1), static_cast<std::int64_t>(n2),
                             delta, d, a, e, static_cast<std::int64_t>(r.f), r.applicable, r.inapplicable_reason,
                             r.removal_term, r.preservation_term, r.floor_term, std::string(to_string(r.binding)),
                             r.closed_form_insufficient});
                }
  } else {
    throw std::invalid_argument(c.where("bounds", "mode") + ": expected bounds or budgets");
  }
  emit(t, out_format(cli, c, "bounds"), out_path(cli, c, "bounds"));
  return 0;
}

Table targets_table(const SweepResult& r, const std::vector<std::string>& metrics, TargetDirection dir) {
  Table t;
  t.columns = {"rule", "metric", "direction", "reference", "target", "half_target_budget", "saving_vs_random"};
  const bool has_random = std::find(r.rules.begin(), r.rules.end(), "random") != r.rules.end();
  for (const auto& m : metrics) {
    for (const auto& rule : r.rules) {
      const auto h = half_target_budget(r, rule, m, dir);
      Cell save;
      if (has_random) {
        try {
          if (const auto s = saving(r, "random", rule, m, dir)) save = *s;
        } catch (const std::domain_error&) {
        }
      }
      t.add_row({rule, m, std::string(dir == TargetDirection::Decrease ? "decrease" : "increase"), h.reference,
                 h.target, h.fraction ? Cell{*h.fraction} : Cell{}, save});
    }
  }
  return t;
}

int finish_sweep(const Common& cli, const Config& c, SweepResult& result, SweepConfig& sweep,
                 const std::vector<std::string>& target_metrics, TargetDirection dir) {
  const auto format = out_format(cli, c, "sweep");
  emit(result.rows_table(), format, cli.output.value_or(sweep.output));
  if (const auto s = c.get("sweep", "summary_output")) emit(result.summary_table(), format, *s);
  if (const auto s = c.get("sweep", "targets_output")) {
    std::vector<std::string> ms;
    for (const auto& m : target_metrics)
      if (std::find(result.metric_names.begin(), result.metric_names.end(), m) != result.metric_names.end())
        ms.push_back(m);
    emit(targets_table(result, ms, dir), format, *s);
  }
  const auto failed = result.failed_count();
  if (failed > 0) {
    std::cerr << "distunlearn: " << failed << " of " << result.rows.size() << " cells failed\n";
    if (!cli.allow_partial) return 1;
  }
  return 0;
}

int run_simulate(const Common& cli) {
  const Config c = cli.load();
  auto sweep = sweep_config_from(c, "random,selective-gaussian");
  if (cli.seed) sweep.master_seed = *cli.seed;
  const double mu2 = c.real("gaussian", "mu2", 0.5);
  const auto n1 = static_cast<std::size_t>(c.integer("gaussian", "n1", 1000));
  const auto n2 = static_cast<std::size_t>(c.integer("gaussian", "n2", 1000));
  auto result = run_gaussian_sweep(mu2, n1, n2, sweep);
  return finish_sweep(cli, c, result, sweep, {"alpha"}, TargetDirection::Increase);
}

int run_experiment(const Common& cli) {
  const Config c = cli.load();
  auto sweep = sweep_config_from(c, "random,lr-cos");
  if (cli.seed) sweep.master_seed = *cli.seed;
  const auto pipeline = pipeline_config_from(c);
  std::vector<std::size_t> zero_rows;
  const auto data = load_dataset_from(c, &zero_rows);
  if (!zero_rows.empty()) {
    std::cerr << "distunlearn: warning: " << zero_rows.size() << " documents have no in-vocabulary term\n";
  }
  auto result = std::visit([&](const auto& ds) { return run_dataset_sweep(ds, pipeline, sweep); }, data);
  return finish_sweep(cli, c, result, sweep, {"recall_p1", "accuracy_class_0"}, TargetDirection::Decrease);
}

int run_score(const Common& cli) {
  const Config c = cli.load();
  const auto rules = split_list(c.str("score", "rules", "lr-cos"));
  const auto master = cli.seed.value_or(static_cast<std::uint64_t>(c.integer("score", "master_seed", 0)));
  const auto params = scoring_params_from(c);
  const auto data = load_dataset_from(c);
  Table t;
  t.columns = {"rule", "row_id", "p1_index", "score", "rank"};
  std::visit(
      [&](const auto& ds) {
        const auto p1_rows = ds.rows_of(Group::P1);
        for (const auto& name : rules) {
          const auto rule = parse_rule(name);
          ScoringParams p = params;
          p.seed = derive_seed(master, "plan", to_string(rule), std::uint64_t{0});
          const auto r = score_features(group_features(ds, Group::P1), group_features(ds, Group::P2), rule, p);
          const auto order = top_f_indices(r.scores, r.scores.size());
          std::vector<std::int64_t> rank(order.size());
          for (std::size_t k = 0; k < order.size(); ++k) rank[order[k]] = static_cast<std::int64_t>(k + 1);
          for (const auto& s : r.scores) {
            t.add_row({std::string(to_string(rule)), ds.row_ids[p1_rows[s.index]], static_cast<std::int64_t>(s.index),
                       s.score, rank[s.index]});
          }
        }
      },
      data);
  emit(t, out_format(cli, c, "score"), out_path(cli, c, "score"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributional unlearning: frontiers, deletion bounds, and deletion sweeps"};
  app.require_subcommand(1);
  Common cli;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", cli.config_path, "Configuration file (key = value with sections)");
    sub->add_option("--set", cli.overrides, "Override a config value: section.key=value");
    sub->add_option("--output,-o", cli.output, "Output path ('-' for stdout)");
    sub->add_option("--format", cli.format, "csv or jsonl");
  };
  auto* frontier = app.add_subcommand("frontier", "Frontier values or achieved (alpha, epsilon) pairs");
  auto* bounds = app.add_subcommand("bounds", "Guarantee bounds or deletion budgets over a grid");
  auto* simulate = app.add_subcommand("simulate", "Gaussian deletion sweeps");
  auto* score = app.add_subcommand("score", "Per-row deletion scores of a dataset");
  auto* experiment = app.add_subcommand("experiment", "Dataset deletion sweeps with retraining");
  for (auto* sub : {frontier, bounds, simulate, score, experiment}) add_common(sub);
  for (auto* sub : {simulate, score, experiment}) sub->add_option("--seed", cli.seed, "Master seed");
  for (auto* sub : {simulate, experiment}) {
    sub->add_flag("--allow-partial", cli.allow_partial, "Exit 0 even when some cells failed");
  }

  CLI11_PARSE(app, argc, argv);
  try {
    if (frontier->parsed()) return run_frontier(cli);
    if (bounds->parsed()) return run_bounds(cli);
    if (simulate->parsed()) return run_simulate(cli);
    if (score->parsed()) return run_score(cli);
    if (experiment->parsed()) return run_experiment(cli);
  } catch (const std::exception& e) {
    std::cerr << "distunlearn: error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
