#include <gtest/gtest.h>

#include <random>
#include <string>

#include "test_util.hpp"

namespace mcrelay {
namespace {

TEST(Config, ReferenceDissociationConstants) {
  const SystemConfig cfg = reference_config(BlockingProfile::low);
  for (int i = 1; i <= 3; ++i) EXPECT_NEAR(cfg.kappa_D(i), 0.1 / 4e5, 1e-20);
  EXPECT_NEAR(*cfg.kappa_block(1), 0.1 / 3e5, 1e-20);
  EXPECT_NEAR(*cfg.kappa_block(2), 0.1 / 3e5, 1e-20);
}

TEST(Config, BlockingProfilesExpandToRates) {
  EXPECT_NEAR(*reference_config(BlockingProfile::high).kappa_block(1), 2e-8, 1e-22);
  EXPECT_NEAR(*reference_config(BlockingProfile::high).kappa_block(2), 2e-8, 1e-22);
  EXPECT_FALSE(reference_config(BlockingProfile::none).kappa_block(1).has_value());
}

TEST(Config, LoadsDocumentInMinutes) {
  const SystemConfig cfg = load_config(R"({
    "D1": 1e-9, "D2": 1e-9, "D3": 1e-9, "d1": 1e-4, "d2": 1e-4,
    "n1R": 250, "n2R": 250, "n3T1": 500, "n3T2": 500,
    "rate_time_unit": "min",
    "gamma1": 4e5, "gamma2": 4e5, "gamma3": 4e5,
    "eta1": 0.1, "eta2": 0.1, "eta3": 0.1,
    "blocking": "high"})");
  for (int i = 1; i <= 3; ++i) EXPECT_NEAR(cfg.kappa_D(i), 2.5e-7, 1e-20);
  EXPECT_NEAR(cfg.gamma[0], 4e5 / 60.0, 1e-9);
  EXPECT_NEAR(*cfg.kappa_block(1), 0.01 / 5e5, 1e-22);
  EXPECT_EQ(cfg.blocking, BlockingProfile::high);
}

TEST(Config, CustomBlockingObject) {
  const SystemConfig cfg =
      load_config(R"({"blocking": {"gamma12": 2e5, "eta12": 0.2, "gamma21": 1e5, "eta21": 0.5}})");
  EXPECT_EQ(cfg.blocking, BlockingProfile::custom);
  EXPECT_NEAR(*cfg.kappa_block(1), 1e-6, 1e-18);
  EXPECT_NEAR(*cfg.kappa_block(2), 5e-6, 1e-18);
}

void expect_error_on(const std::string& doc, const std::string& field) {
  try {
    load_config(doc);
    FAIL() << "no error for " << doc;
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), field) << e.what();
  }
}

TEST(Config, ValidationNamesTheField) {
  expect_error_on(R"({"d1": 0})", "d1");
  expect_error_on(R"({"D3": -1e-9})", "D3");
  expect_error_on(R"({"n3T2": 0})", "n3T2");
  expect_error_on(R"({"eta2": 0})", "eta2");
  expect_error_on(R"({"blocking": "medium"})", "blocking");
  expect_error_on(R"({"blocking": {"gamma12": 1}})", "blocking.eta12");
  expect_error_on(R"({"colour": 3})", "colour");
  expect_error_on(R"({"n1R": 2.5})", "n1R");
  expect_error_on(R"({"zeta_R": "lots"})", "zeta_R");
  expect_error_on(R"({"rate_time_unit": "h"})", "rate_time_unit");
  expect_error_on(R"({"target_nu": 1.5})", "target_nu");
  expect_error_on("[1, 2]", "<root>");
  expect_error_on("{not json", "<root>");
}

TEST(Config, SamplingOffsetMayNotExceedSlot) {
  expect_error_on(R"({"t0": 2.0, "ts": 1.0})", "t0");
  EXPECT_NO_THROW(load_config(R"({"t0": 1.0, "ts": 1.0})"));
}

TEST(Config, UnstableRecursionRejected) {
  // Sampling every peak time leaves nine slots of memory with odd gains
  // summing above one.
  expect_error_on(R"({"qT1R": 9, "qT2R": 9, "qRT1": 9, "qRT2": 9, "ts": 1.6666666666666667})", "qT1R");
}

TEST(Config, OverridesApplyBeforeValidation) {
  const SystemConfig cfg = load_config("{}", {"qT1R=3", "blocking=none", "c_SNC=1e-9", "t0=auto"});
  EXPECT_EQ(cfg.qT1R, 3);
  EXPECT_EQ(cfg.blocking, BlockingProfile::none);
  ASSERT_TRUE(cfg.c_SNC.has_value());
  EXPECT_DOUBLE_EQ(*cfg.c_SNC, 1e-9);
  EXPECT_FALSE(cfg.t0.has_value());
  EXPECT_THROW(load_config("{}", {"qT1R"}), ConfigError);
  EXPECT_THROW(load_config("{}", {"=3"}), ConfigError);
}

TEST(Config, RoundTripProperty) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> mem(0, 3);
  for (int trial = 0; trial < 200; ++trial) {
    SystemConfig cfg = testing::random_config(rng);
    cfg.qT1R = mem(rng);
    cfg.qRT2 = mem(rng);
    if (trial % 3 == 0) cfg.c_PNC = testing::log_uniform(rng, 1e-10, 1e-7);
    if (trial % 4 == 0) cfg.ts = testing::log_uniform(rng, 50.0, 500.0);
    if (trial % 5 == 0) {
      cfg.blocking = BlockingProfile::custom;
      cfg.gamma_block = {testing::log_uniform(rng, 1e2, 1e4), testing::log_uniform(rng, 1e2, 1e4)};
      cfg.eta_block = {testing::log_uniform(rng, 1e-4, 1e-2), testing::log_uniform(rng, 1e-4, 1e-2)};
    }
    const SystemConfig back = config_from_json(nlohmann::json::parse(config_to_json(cfg).dump()));
    EXPECT_EQ(back, cfg) << config_to_json(cfg).dump();
  }
}

TEST(Units, ConvertReleaseToConcentration) {
  EXPECT_EQ(unit_convert(0.0, 7.36e10), 0.0);
  EXPECT_DOUBLE_EQ(unit_convert(1.0, 1000.0), 1.0);
  EXPECT_NEAR(unit_convert(1e-22, 7.36e10), 7.36e-15, 1e-27);
  EXPECT_DOUBLE_EQ(release_for_concentration(unit_convert(3e-17, 5e10), 5e10), 3e-17);
}

}  // namespace
}  // namespace mcrelay
