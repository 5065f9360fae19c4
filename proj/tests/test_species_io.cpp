#include <gtest/gtest.h>

#include "coolheat/species_io.hpp"

using namespace coolheat;

namespace {

const char* kMinimal = R"({
  "manifolds": [
    {"label": "S1/2", "J": "1/2", "energy_THz": 0.0, "classification": "bright"},
    {"label": "P1/2", "J": "1/2", "energy_THz": 607.4263, "classification": "fast-excited"}
  ],
  "transitions": [
    {"upper": "P1/2", "lower": "S1/2", "wavelength_nm": 493.5453, "A_total_per_s": 9.5e7}
  ]
})";

nlohmann::json minimal() { return nlohmann::json::parse(kMinimal); }

}  // namespace

TEST(SpeciesIo, BundledFileLoads) {
  auto cfg = load_species(std::string(COOLHEAT_TEST_DATA_DIR) + "/species/ba138_plus.json");
  EXPECT_EQ(cfg.manifolds.size(), 4u);
  EXPECT_NEAR(1.0 / cfg.transitions[cfg.transition_index("S1/2-D5/2")].A_total, 31.2, 1e-12);
  ASSERT_TRUE(cfg.quench);
  EXPECT_DOUBLE_EQ(cfg.quench->rate, 0.01697);
  double total = 0.0;
  for (const auto& t : cfg.transitions)
    if (t.upper == "P3/2") total += t.A_total;
  EXPECT_NEAR(1.0 / total, 6.31e-9, 1e-13);
}

TEST(SpeciesIo, DefaultsLandeFactors) {
  auto cfg = species_from_json(minimal());
  EXPECT_DOUBLE_EQ(cfg.manifolds[0].g_factor, 2.0);
  EXPECT_NEAR(cfg.manifolds[1].g_factor, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(*lande_g_doublet("D5/2", HalfInt::from_twice(5)), 1.2, 1e-15);
  EXPECT_NEAR(*lande_g_doublet("P3/2", HalfInt::from_twice(3)), 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(*lande_g_doublet("D3/2", HalfInt::from_twice(3)), 0.8, 1e-15);
}

TEST(SpeciesIo, RejectsUnknownKeys) {
  auto j = minimal();
  j["extra"] = 1;
  EXPECT_THROW(species_from_json(j), ConfigError);
  j = minimal();
  j["manifolds"][0]["mass"] = 138;
  EXPECT_THROW(species_from_json(j), ConfigError);
  j = minimal();
  j["transitions"][0]["branching"] = 0.7;
  EXPECT_THROW(species_from_json(j), ConfigError);
}

TEST(SpeciesIo, RejectsNumericJ) {
  auto j = minimal();
  j["manifolds"][0]["J"] = 0.5;
  EXPECT_THROW(species_from_json(j), ConfigError);
}

TEST(SpeciesIo, RejectsBadClassificationAndMultipole) {
  auto j = minimal();
  j["manifolds"][0]["classification"] = "grey";
  EXPECT_THROW(species_from_json(j), ConfigError);
  j = minimal();
  j["transitions"][0]["multipole"] = "M1";
  EXPECT_THROW(species_from_json(j), ConfigError);
}

TEST(SpeciesIo, MissingFileIsConfigError) { EXPECT_THROW(load_species("/nonexistent/species.json"), ConfigError); }

TEST(SpeciesIo, RoundTrip) {
  auto cfg = load_species(std::string(COOLHEAT_TEST_DATA_DIR) + "/species/ba138_plus.json");
  auto back = species_from_json(species_to_json(cfg));
  ASSERT_EQ(back.manifolds.size(), cfg.manifolds.size());
  for (std::size_t i = 0; i < cfg.manifolds.size(); ++i) {
    EXPECT_EQ(back.manifolds[i].label, cfg.manifolds[i].label);
    EXPECT_EQ(back.manifolds[i].J, cfg.manifolds[i].J);
    EXPECT_EQ(back.manifolds[i].classification, cfg.manifolds[i].classification);
  }
  for (std::size_t i = 0; i < cfg.transitions.size(); ++i) {
    EXPECT_EQ(back.transitions[i].rank, cfg.transitions[i].rank);
    EXPECT_EQ(back.transitions[i].A_total, cfg.transitions[i].A_total);
  }
  EXPECT_EQ(back.repump->rate, cfg.repump->rate);

  auto m = species_from_json(minimal());
  EXPECT_FALSE(species_from_json(species_to_json(m)).quench);
}
