#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsg/experiment.hpp"

using namespace hsg;

namespace {

ExperimentConfig resolved(const std::string& text) {
  auto cfg = parse_config(json::parse(text));
  resolve_config(cfg);
  return cfg;
}

ErrorKind kind_of(const std::string& text) {
  try {
    resolved(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Domain;
}

// Column `name` of the rows of a CSV string.
std::vector<std::string> column(const std::string& csv, const std::string& name) {
  std::istringstream in(csv);
  std::string line, cell;
  std::getline(in, line);
  std::istringstream head(line);
  int idx = -1;
  for (int k = 0; std::getline(head, cell, ','); ++k)
    if (cell == name) idx = k;
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    for (int k = 0; std::getline(row, cell, ','); ++k)
      if (k == idx) out.push_back(cell);
  }
  return out;
}

}  // namespace

TEST(Config, RejectsMalformedInput) {
  EXPECT_EQ(kind_of(R"({"grid": {"dimension": 3}})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"grid": {}, "extra": 1})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"grid": {"cells": "many"}})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"grid": {}, "campaigns": ["everything"]})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"grid": {"dimension": 1, "metric": "grushin"}})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"grid": {"cells": 256}, "q": 0.2})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"grid": {"cells": 256}, "campaigns": "capacity", "d": [1.0]})"), ErrorKind::Config);
  EXPECT_EQ(kind_of(R"({"grid": {"cells": 256}, "campaigns": "capacity", "rho": ["r/2"]})"), ErrorKind::Config);
}

TEST(Config, DecayResolutionIsValidatedBeforeSolving) {
  const char* base = R"({"grid": {"cells": 256}, "campaigns": "decay"})";
  EXPECT_EQ(kind_of(base), ErrorKind::Config);
  const auto cfg = resolved(R"({"grid": {"cells": 256}, "campaigns": "decay", "decay": {"allow_underresolved": true}})");
  EXPECT_NEAR(cfg.decay_R0, 1.0 / 12, 1e-8);
  EXPECT_LT(cfg.decay_R0, 1.0 / 12);
}

TEST(Config, PrerequisitesAddedInDependencyOrder) {
  const auto cfg = resolved(R"({"grid": {"cells": 256}, "campaigns": ["decay"], "decay": {"allow_underresolved": true}})");
  EXPECT_EQ(cfg.campaigns, (std::vector<std::string>{"constants", "harnack", "decay"}));
  EXPECT_EQ(cfg.prerequisites, (std::vector<std::string>{"constants", "harnack"}));
  const auto echo = config_to_json(cfg);
  EXPECT_EQ(echo["prerequisites"].size(), 2u);
  EXPECT_EQ(parse_config(echo).campaigns, cfg.campaigns);
}

TEST(Config, HarnackHeldOutRowsUseUnseenRadii) {
  const auto cfg = resolved(R"({"grid": {"cells": 256}, "campaigns": "harnack", "ladder": {"R": 0.5}})");
  const auto mid = cfg.harnack_held_out_radii();
  ASSERT_EQ(mid.size(), 3u);
  for (std::size_t k = 0; k < mid.size(); ++k) {
    EXPECT_NEAR(mid[k], std::sqrt(cfg.harnack_radii[k] * cfg.harnack_radii[k + 1]), 1e-15);
    EXPECT_EQ(std::count(cfg.harnack_radii.begin(), cfg.harnack_radii.end(), mid[k]), 0);
  }
  EXPECT_EQ(kind_of(R"({"grid": {"cells": 256}, "campaigns": "harnack", "harnack": {"probes": -1}})"), ErrorKind::Config);
}

TEST(ParallelMap, OrderedResultsAndLowestException) {
  const auto v = parallel_map(50, 4, [](std::size_t i) { return static_cast<int>(i * i); });
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
  try {
    parallel_map(20, 3, [](std::size_t i) -> int {
      if (i == 7 || i == 15) throw std::runtime_error(std::to_string(i));
      return 0;
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "7");
  }
}

TEST(Run, IntervalPoincareConstantInCsv) {
  auto cfg = resolved(R"({"grid": {"dimension": 1, "cells": 2048}, "campaigns": "constants",
                          "ladder": {"R": 0.5, "fractions": [0.25, 0.5]}})");
  const auto out = Experiment(cfg).run();
  EXPECT_EQ(out.exit_code(), 0);
  const auto c1 = column(out.tables.at("poincare").str(), "c1");
  ASSERT_FALSE(c1.empty());
  EXPECT_NEAR(std::stod(c1.back()), 2 / std::numbers::pi, 0.01 * 2 / std::numbers::pi);
}

TEST(Run, DiskCondenserCapacityInCsvAndDeterminism) {
  const char* text = R"({"grid": {"cells": 512}, "campaigns": "capacity",
                         "ladder": {"R": 0.5, "fractions": [0.25]}, "d": [2], "rho": ["h"]})";
  auto cfg = resolved(text);
  EXPECT_EQ(cfg.prerequisites, std::vector<std::string>{"constants"});
  const auto a = Experiment(cfg).run();
  EXPECT_EQ(a.exit_code(), 0);
  const auto cap = column(a.tables.at("capacity").str(), "capacity");
  ASSERT_EQ(cap.size(), 1u);
  const double oracle = 2 * std::numbers::pi / std::log(2.0);
  EXPECT_NEAR(std::stod(cap[0]), oracle, 0.03 * oracle);
  cfg.threads = 2;
  auto b = Experiment(cfg).run();
  for (const auto& [stem, table] : a.tables) EXPECT_EQ(table.str(), b.tables.at(stem).str()) << stem;
  b.summary["config"]["threads"] = 1;
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
}

TEST(Run, FailuresCarryBothNumbers) {
  RunOutcome out;
  out.failures.push_back({"capacity", "duality_pairing", 3, 1.1, 1.0});
  EXPECT_EQ(out.exit_code(), 1);
  CsvTable t({"a", "b", "c"});
  t.add({1.5, std::string("x"), true});
  t.add({std::monostate{}, 2LL, false});
  EXPECT_EQ(t.str(), "a,b,c\n1.5,x,pass\n,2,fail\n");
  EXPECT_THROW(t.add({1.0}), Error);
}

TEST(Refine, DiskCapacityIsFirstOrder) {
  const auto cfg = resolved(R"({"grid": {"cells": 128}, "campaigns": "capacity", "refine": true,
                                "ladder": {"R": 0.5, "fractions": [0.25]}, "d": [2], "rho": ["h"]})");
  const auto out = refine(cfg);
  const std::string csv = out.tables.at("refine").str();
  const auto q = column(csv, "quantity"), order = column(csv, "observed_order");
  bool seen = false;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] == "capacity") {
      seen = true;
      EXPECT_GE(std::stod(order[i]), 0.9);
    }
  EXPECT_TRUE(seen);
  EXPECT_EQ(out.exit_code(), 0);
  auto plain = cfg;
  plain.refine = false;
  EXPECT_THROW(refine(plain), Error);
}
