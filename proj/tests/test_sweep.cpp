#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "distunlearn/config.hpp"
#include "distunlearn/emit.hpp"
#include "distunlearn/sweep.hpp"
#include "distunlearn/synthetic.hpp"

using namespace distunlearn;

namespace {

SweepConfig small_sweep(std::vector<std::string> rules, std::vector<double> budgets, int seeds) {
  SweepConfig c;
  c.rules = std::move(rules);
  c.budget_fractions = std::move(budgets);
  for (int s = 0; s < seeds; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  c.master_seed = 77;
  return c;
}

/// A result whose (single-seed) metric curve is given directly.
SweepResult curve_result(const std::vector<double>& budgets,
                         const std::map<std::string, std::vector<double>>& curves) {
  SweepResult r;
  r.budgets = budgets;
  r.seeds = {0};
  r.metric_names = {"m"};
  for (const auto& [rule, values] : curves) {
    r.rules.push_back(rule);
    for (std::size_t b = 0; b < budgets.size(); ++b) {
      SweepRow row;
      row.rule = rule;
      row.budget_index = b;
      row.budget_fraction = budgets[b];
      row.metrics["m"] = values[b];
      r.rows.push_back(row);
    }
  }
  return r;
}

SparseDataset small_text(std::size_t ham, std::size_t spam) {
  SyntheticCorpusConfig sc;
  sc.n_ham = ham;
  sc.n_spam = spam;
  TfidfConfig tc;
  tc.stopword_removal = true;
  return text_dataset(synthetic_two_cluster_corpus(sc), tc, {1});
}

/// p1/p2 group independent of the label, so deleting all of p1 keeps both classes.
DenseDataset grouped_dense(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  DenseDataset ds;
  ds.features.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(rng.uniform_index(2));
    const bool p1 = rng.uniform01() < 0.3;
    for (int j = 0; j < 3; ++j) ds.features(static_cast<Eigen::Index>(i), j) = rng.normal() + (j == 0 ? 2.0 * y - 1.0 : 0.0) + (p1 && j == 1 ? 1.5 : 0.0);
    ds.labels.push_back(y);
    ds.groups.push_back(p1 ? Group::P1 : Group::P2);
    ds.row_ids.push_back("d" + std::to_string(i));
  }
  ds.num_classes = 2;
  return ds;
}

std::string run_cli(const std::string& args, int* status) {
  const auto out = std::filesystem::temp_directory_path() / "distunlearn_cli_stdout.txt";
  const std::string cmd = std::string(DISTUNLEARN_CLI) + " " + args + " > " + out.string() + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  *status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return read_text_file(out.string());
}

std::filesystem::path temp_file(const std::string& name, const std::string& content) {
  const auto p = std::filesystem::temp_directory_path() / name;
  write_text_file(p.string(), content);
  return p;
}

}  // namespace

TEST(SweepConfig, Validation) {
  EXPECT_NO_THROW(small_sweep({"random"}, {0, 0.5, 1}, 1).validate());
  EXPECT_THROW(small_sweep({}, {0, 1}, 1).validate(), std::invalid_argument);
  EXPECT_THROW(small_sweep({"random"}, {0, 1}, 0).validate(), std::invalid_argument);
  EXPECT_THROW(small_sweep({"random"}, {0.5, 0.2}, 1).validate(), std::invalid_argument);
  EXPECT_THROW(small_sweep({"random"}, {0, 1.2}, 1).validate(), std::invalid_argument);
  EXPECT_THROW(small_sweep({"bogus"}, {0, 1}, 1).validate(), std::invalid_argument);
}

TEST(GaussianSweep, FullAndZeroDeletion) {
  const auto r = run_gaussian_sweep(0.5, 300, 200, small_sweep({"random", "selective-gaussian"}, {0, 0.5, 1}, 3));
  ASSERT_EQ(r.rows.size(), 2u * 3 * 3);
  for (const auto& seed : r.seeds) {
    // regenerate this seed's p2 sample: full deletion fits p2 alone
    Rng rng(derive_seed(77, "data", seed));
    double s2 = 0.0;
    for (int i = 0; i < 300; ++i) rng.normal(0.0, 1.0);
    for (int i = 0; i < 200; ++i) s2 += rng.normal(0.5, 1.0);
    for (const auto& row : r.rows) {
      if (row.seed != seed) continue;
      if (row.budget_index == 2) {
        EXPECT_NEAR(row.metrics.at("mu_hat"), s2 / 200, 1e-12);
        EXPECT_EQ(row.removed, 300u);
      }
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    // budget 0: the two rules see the same samples and delete nothing
    EXPECT_EQ(r.rows[s].metrics, r.rows[9 + s].metrics);
  }
  EXPECT_THROW(run_gaussian_sweep(0.5, 10, 10, small_sweep({"lr-cos"}, {0, 1}, 1)), std::invalid_argument);
}

TEST(GaussianSweep, EpsilonShrinksWithN2AtFullDeletion) {
  auto cfg = small_sweep({"random"}, {1.0}, 30);
  const double small = run_gaussian_sweep(1.0, 50, 100, cfg).summarize_cell("random", 0, "epsilon").mean;
  const double large = run_gaussian_sweep(1.0, 50, 10000, cfg).summarize_cell("random", 0, "epsilon").mean;
  EXPECT_LT(large, small / 20);
  // E[eps] = 1 / (2 n2) for the full-deletion refit
  EXPECT_NEAR(small, 1.0 / 200, 3 * std::sqrt(2.0) / 200 / std::sqrt(30.0));
}

TEST(GaussianSweep, DeterministicAndWorkerIndependent) {
  const auto cfg = small_sweep({"random", "selective-gaussian"}, {0, 0.25, 0.5, 0.75, 1}, 4);
  setenv("DISTUNLEARN_WORKERS", "1", 1);
  const auto a = to_csv(run_gaussian_sweep(0.5, 200, 200, cfg).rows_table());
  setenv("DISTUNLEARN_WORKERS", "3", 1);
  const auto b = to_csv(run_gaussian_sweep(0.5, 200, 200, cfg).rows_table());
  unsetenv("DISTUNLEARN_WORKERS");
  EXPECT_EQ(a, b);
}

TEST(DatasetSweep, ZeroBudgetIdenticalAcrossRulesAndFailedCells) {
  const auto ds = small_text(300, 60);
  const auto r = run_dataset_sweep(ds, PipelineConfig{}, small_sweep({"random", "lr-cos", "norm"}, {0, 0.5, 1}, 2));
  const std::size_t nb = 3, ns = 2;
  for (std::size_t s = 0; s < ns; ++s) {
    const auto& base = r.rows[s];
    ASSERT_FALSE(base.failed) << base.failure;
    for (std::size_t ri = 1; ri < 3; ++ri) EXPECT_EQ(r.rows[ri * nb * ns + s].metrics, base.metrics);
  }
  // all spam removed: single-class training set, recorded not skipped
  std::size_t failed = 0;
  for (const auto& row : r.rows) {
    if (row.budget_index == 2) {
      EXPECT_TRUE(row.failed);
      EXPECT_NE(row.failure.find("single class"), std::string::npos) << row.failure;
      ++failed;
    } else {
      EXPECT_FALSE(row.failed) << row.failure;
    }
  }
  EXPECT_EQ(r.failed_count(), failed);
  const auto cell = r.summarize_cell("lr-cos", 2, "recall_p1");
  EXPECT_EQ(cell.failed, 2u);
  EXPECT_EQ(cell.count, 0u);
  EXPECT_TRUE(std::isnan(cell.mean));
  const auto ok = r.summarize_cell("lr-cos", 1, "recall_p1");
  EXPECT_EQ(ok.count, 2u);
  EXPECT_EQ(ok.failed, 0u);
}

TEST(DatasetSweep, FullDeletionKeepsHeldOutRecallDefined) {
  const auto ds = grouped_dense(400, 5);
  const auto r = run_dataset_sweep(ds, PipelineConfig{}, small_sweep({"random", "maha-mu2"}, {0, 1}, 2));
  EXPECT_EQ(r.failed_count(), 0u);
  for (const auto& row : r.rows) {
    EXPECT_TRUE(std::isfinite(row.metrics.at("recall_p1")));
    EXPECT_GT(row.metrics.at("train_rows"), 0.0);
  }
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& keep = r.rows[s];
    const auto& gone = r.rows[2 + s];
    EXPECT_EQ(keep.removed, 0u);
    EXPECT_DOUBLE_EQ(gone.metrics.at("train_rows") + static_cast<double>(gone.removed), keep.metrics.at("train_rows"));
  }
}

TEST(DatasetSweep, ByteIdenticalReruns) {
  const auto ds = small_text(200, 50);
  const auto cfg = small_sweep({"random", "lr-cos"}, {0, 0.3, 0.6}, 2);
  const auto a = run_dataset_sweep(ds, PipelineConfig{}, cfg);
  setenv("DISTUNLEARN_WORKERS", "2", 1);
  const auto b = run_dataset_sweep(ds, PipelineConfig{}, cfg);
  unsetenv("DISTUNLEARN_WORKERS");
  EXPECT_EQ(to_csv(a.rows_table()), to_csv(b.rows_table()));
  EXPECT_EQ(to_jsonl(a.summary_table()), to_jsonl(b.summary_table()));
}

TEST(Summary, MeanAndStandardError) {
  SweepResult r;
  r.rules = {"random"};
  r.budgets = {0};
  r.seeds = {0, 1, 2, 3};
  r.metric_names = {"m"};
  const std::vector<double> v = {1, 2, 4, 9};
  for (std::size_t s = 0; s < 4; ++s) {
    SweepRow row;
    row.rule = "random";
    row.seed = s;
    row.metrics["m"] = v[s];
    r.rows.push_back(row);
  }
  r.rows.push_back(r.rows.back());
  r.rows.back().failed = true;
  const auto c = r.summarize_cell("random", 0, "m");
  EXPECT_DOUBLE_EQ(c.mean, 4.0);
  // sample sd of {1,2,4,9} = sqrt(38/3)
  EXPECT_NEAR(c.std_error, std::sqrt(38.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(c.failed, 1u);
}

TEST(HalfTarget, Examples) {
  const std::vector<double> b = {0, 0.25, 0.5, 0.75, 1};
  const auto flat = curve_result(b, {{"random", {1, 1, 1, 1, 1}}});
  EXPECT_FALSE(half_target_budget(flat, "random", "m").fraction.has_value());
  const auto exact = curve_result(b, {{"random", {0.8, 0.6, 0.4, 0.3, 0.1}}});
  EXPECT_EQ(half_target_budget(exact, "random", "m").fraction, 0.5);
  const auto interp = curve_result(b, {{"random", {1.0, 0.8, 0.2, 0.1, 0.0}}});
  // crossing of 0.5 between (0.25, 0.8) and (0.5, 0.2): 0.25 + 0.25 * 0.5
  EXPECT_NEAR(*half_target_budget(interp, "random", "m").fraction, 0.375, 1e-15);
  const auto up = curve_result(b, {{"random", {0.0, 0.2, 0.5, 0.8, 1.0}}});
  EXPECT_NEAR(*half_target_budget(up, "random", "m", TargetDirection::Increase).fraction, 0.5, 1e-15);
  const auto no_zero = curve_result({0.1, 0.5}, {{"random", {1, 0.1}}});
  EXPECT_THROW(half_target_budget(no_zero, "random", "m"), std::invalid_argument);
  EXPECT_THROW(half_target_budget(exact, "random", "nope"), std::invalid_argument);
  EXPECT_THROW(half_target_budget(exact, "lr-cos", "m"), std::invalid_argument);
}

TEST(HalfTarget, FinerGridNeverLaterByMoreThanOneStep) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    // a noisy decreasing curve sampled on a 0.01 grid; coarse = every 5th point
    std::vector<double> fine_b, fine_v, coarse_b, coarse_v;
    double v = 1.0;
    for (int i = 0; i <= 100; ++i) {
      fine_b.push_back(i / 100.0);
      fine_v.push_back(v);
      if (i % 5 == 0) {
        coarse_b.push_back(i / 100.0);
        coarse_v.push_back(v);
      }
      v = std::max(0.0, v - 0.02 * rng.uniform01() + 0.01 * (rng.uniform01() - 0.5));
    }
    const auto hf = half_target_budget(curve_result(fine_b, {{"random", fine_v}}), "random", "m").fraction;
    const auto hc = half_target_budget(curve_result(coarse_b, {{"random", coarse_v}}), "random", "m").fraction;
    if (hc) {
      ASSERT_TRUE(hf.has_value());
      EXPECT_LE(*hf, *hc + 0.05 + 1e-12);
    }
  }
}

TEST(Saving, Examples) {
  const std::vector<double> b = {0, 0.18, 0.65, 1};
  const auto r = curve_result(b, {{"random", {1, 0.9, 0.5, 0}}, {"lr-cos", {1, 0.5, 0.2, 0}}});
  EXPECT_NEAR(*saving(r, "random", "lr-cos", "m"), 1.0 - 18.0 / 65.0, 1e-12);
  EXPECT_NEAR(1.0 - 18.0 / 65.0, 0.723, 1e-3);
  EXPECT_EQ(*saving(r, "random", "random", "m"), 0.0);
  const auto sms = curve_result({0, 0.75, 0.9}, {{"random", {1, 0.9, 0.5}}, {"lr-cos", {1, 0.5, 0.1}}});
  EXPECT_NEAR(*saving(sms, "random", "lr-cos", "m"), 1.0 - 75.0 / 90.0, 1e-12);
  const auto zero = curve_result({0, 1}, {{"random", {0, 0}}, {"lr-cos", {0, 0}}});
  EXPECT_THROW(saving(zero, "random", "lr-cos", "m"), std::domain_error);
  const auto never = curve_result({0, 1}, {{"random", {1, 1}}, {"lr-cos", {1, 0}}});
  EXPECT_FALSE(saving(never, "random", "lr-cos", "m").has_value());
}

TEST(Emit, CsvAndJsonRoundTrip) {
  Table t;
  t.columns = {"name", "x", "n", "flag", "missing"};
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    t.add_row({std::string(i == 3 ? "a,\"b\"\n" : "row") + std::to_string(i), rng.normal() * std::pow(10.0, i % 40 - 20),
               std::int64_t{i}, i % 2 == 0, Cell{}});
  }
  const auto csv = to_csv(t);
  const auto json = to_jsonl(t);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
  std::size_t line = 0;
  for (const auto& l : split_lines(json)) {
    if (l.empty()) continue;
    const auto obj = nlohmann::json::parse(l);
    EXPECT_EQ(obj["x"].get<double>(), std::get<double>(t.rows[line][1]));
    EXPECT_EQ(obj["name"].get<std::string>(), std::get<std::string>(t.rows[line][0]));
    EXPECT_TRUE(obj["missing"].is_null());
    ++line;
  }
  EXPECT_EQ(line, 50u);
  // CSV: quoted fields may contain newlines, so re-split by a full parse of row 0..2 only
  const auto lines = split_lines(csv);
  EXPECT_EQ(lines[0], "name,x,n,flag,missing");
  const auto f = split_csv_line(lines[1]);
  EXPECT_EQ(parse_double(f[1], "x"), std::get<double>(t.rows[0][1]));
  EXPECT_EQ(f[4], "");
}

TEST(Emit, EmptyResultIsHeaderOnlyAndFilesAreByteIdentical) {
  Table t;
  t.columns = {"a", "b"};
  EXPECT_EQ(to_csv(t), "a,b\n");
  EXPECT_EQ(to_jsonl(t), "");
  const auto p = std::filesystem::temp_directory_path() / "distunlearn_emit.csv";
  t.add_row({1.0 / 3.0, std::string("x")});
  emit(t, OutputFormat::Csv, p.string());
  const auto first = read_text_file(p.string());
  emit(t, OutputFormat::Csv, p.string());
  EXPECT_EQ(read_text_file(p.string()), first);
  EXPECT_EQ(first, "a,b\n0.33333333333333331,x\n");
  EXPECT_THROW(emit(t, OutputFormat::Csv, "/nonexistent-dir/out.csv"), std::runtime_error);
}

TEST(Config, ListsGridsAndOverrides) {
  EXPECT_EQ(parse_int_list("0..3, 7", "t"), (std::vector<std::uint64_t>{0, 1, 2, 3, 7}));
  const auto g = parse_real_list("0:1:0.05", "t");
  ASSERT_EQ(g.size(), 21u);
  EXPECT_EQ(g[3], 0.15);
  EXPECT_EQ(g.back(), 1.0);
  EXPECT_EQ(parse_real_list("0.1, 0.5", "t"), (std::vector<double>{0.1, 0.5}));
  auto c = Config::from_text("[sweep]\nrules = random, lr-cos\nbudgets = 0:1:0.5\nseeds = 1..2\nmaster_seed = 9\n");
  auto s = sweep_config_from(c, "random");
  EXPECT_EQ(s.rules, (std::vector<std::string>{"random", "lr-cos"}));
  EXPECT_EQ(s.budget_fractions, (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{1, 2}));
  EXPECT_EQ(s.master_seed, 9u);
  c.set("sweep.master_seed=11");
  EXPECT_EQ(sweep_config_from(c, "random").master_seed, 11u);
  EXPECT_THROW(c.set("sweep.typo=1"), std::invalid_argument);
  EXPECT_THROW(Config::from_text("[sweep]\nrulez = random\n"), std::invalid_argument);
  EXPECT_THROW(Config::from_text("[nosuch]\nx = 1\n"), std::invalid_argument);
  EXPECT_THROW(sweep_config_from(Config::from_text("[sweep]\nbudgets = 0.5, 0.1\n"), "random"), std::invalid_argument);
  const auto p = pipeline_config_from(Config::from_text("[dataset]\nl2 = auto\nrecall_mode = group\n"));
  EXPECT_FALSE(p.l2_strength.has_value());
  EXPECT_EQ(p.eval.recall_mode, RecallMode::Group);
}

TEST(Cli, ExitCodesAndDeterminism) {
  int status = -1;
  const auto sim = temp_file("distunlearn_sim.ini",
                             "[gaussian]\nmu2 = 0.5\nn1 = 100\nn2 = 100\n[sweep]\nbudgets = 0:1:0.25\nseeds = 0..2\n");
  const auto out1 = run_cli("simulate " + sim.string() + " --seed 3", &status);
  EXPECT_EQ(status, 0);
  EXPECT_EQ(out1.substr(0, out1.find('\n')),
            "rule,budget_fraction,budget_index,seed,removed,status,failure,alpha,epsilon,mu_hat");
  EXPECT_EQ(run_cli("simulate " + sim.string() + " --seed 3", &status), out1);
  EXPECT_NE(run_cli("simulate " + sim.string() + " --seed 4", &status), out1);
  const auto jsonl = run_cli("simulate " + sim.string() + " --seed 3 --format jsonl", &status);
  EXPECT_EQ(nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')))["rule"], "random");

  const auto exp = temp_file("distunlearn_exp.ini",
                             "[dataset]\nsource = synthetic\n[tfidf]\nmax_features = 500\n"
                             "[sweep]\nrules = random\nbudgets = 0, 1\nseeds = 0\n");
  run_cli("experiment " + exp.string(), &status);
  EXPECT_EQ(status, 1);  // budget 1 removes every spam message
  run_cli("experiment " + exp.string() + " --allow-partial", &status);
  EXPECT_EQ(status, 0);

  const auto bad = temp_file("distunlearn_bad.ini", "[sweep]\nbudgets = 0.5, 0.1\n");
  run_cli("simulate " + bad.string(), &status);
  EXPECT_EQ(status, 2);
  run_cli("frontier " + std::string(DISTUNLEARN_SOURCE_DIR) + "/configs/frontier_gaussian.ini", &status);
  EXPECT_EQ(status, 0);
  run_cli("bounds " + std::string(DISTUNLEARN_SOURCE_DIR) + "/configs/budgets.ini", &status);
  EXPECT_EQ(status, 0);
}
