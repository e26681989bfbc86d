#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "itals/composite.hpp"
#include "itals/error.hpp"
#include "itals/model_io.hpp"
#include "itals/solver.hpp"

namespace itals {
namespace {

Model trained_model(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<EntityId> coords;
  std::vector<double> weights;
  for (EntityId u = 0; u < 6; ++u) {
    for (EntityId i = 0; i < 5; ++i) {
      for (EntityId c = 0; c < 3; ++c) {
        if (gen() % 3 == 0) {
          coords.insert(coords.end(), {u, i, c});
          weights.push_back(2.0 + static_cast<double>(gen() % 50));
        }
      }
    }
  }
  auto obs = ObservationTensor::from_cells(TensorShape::with_context(6, 5, 3, "timeband"), coords, weights);
  auto model = fit(obs, TrainConfig{.features = 3, .epochs = 2, .seed = seed});
  model.id_maps[0] = IdMap({"a", "b", "c", "d", "e", "f"});
  model.id_maps[1] = IdMap({"i1", "i2", "i3", "i4", "i5"});
  model.metadata["context"] = "timeband:uniform:3";
  return model;
}

TEST(ModelIo, RoundTripIsBitExact) {
  const auto model = trained_model(3);
  std::stringstream buf;
  save_model(model, buf);
  const auto loaded = load_model(buf);
  EXPECT_EQ(loaded.shape, model.shape);
  for (std::size_t a = 0; a < model.order(); ++a) {
    EXPECT_EQ(loaded.factors[a], model.factors[a]);
    EXPECT_EQ(loaded.grams[a], model.grams[a]);
    EXPECT_EQ(loaded.id_maps[a], model.id_maps[a]);
  }
  EXPECT_EQ(loaded.metadata, model.metadata);
  EXPECT_EQ(loaded.config.seed, model.config.seed);
  EXPECT_EQ(loaded.config.reg_mode, model.config.reg_mode);
}

TEST(ModelIo, HeaderLayout) {
  const auto model = trained_model(4);
  std::stringstream buf;
  save_model(model, buf);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 5), "ITALS");
  EXPECT_EQ(bytes[5], static_cast<char>(kModelFormatVersion));
  EXPECT_EQ(bytes.substr(6, 3), std::string(3, '\0'));
  EXPECT_EQ(bytes[13], 3);   // D
  EXPECT_EQ(bytes[17], 3);   // K
  EXPECT_EQ(bytes[21], 6);   // S_1
}

TEST(ModelIo, RejectsCorruptFiles) {
  const auto model = trained_model(5);
  std::stringstream buf;
  save_model(model, buf);
  std::string bytes = buf.str();

  std::istringstream truncated(bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(load_model(truncated), FormatError);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::istringstream in1(bad_magic);
  EXPECT_THROW(load_model(in1), FormatError);

  std::string bad_version = bytes;
  bad_version[5] = 9;
  std::istringstream in2(bad_version);
  EXPECT_THROW(load_model(in2), FormatError);
}

TEST(ModelIo, CompositeRoundTrip) {
  std::vector<EntityId> coords{0, 0, 0, 1, 1, 0, 1, 0, 2};
  auto obs = ObservationTensor::from_cells(TensorShape::with_context(2, 2, 3), coords, {5, 6, 7});
  auto composite = fit_ica(obs, TrainConfig{.features = 2, .epochs = 2});
  composite.id_maps[0] = IdMap({"x", "y"});
  std::stringstream buf;
  save_composite(composite, buf);
  std::stringstream copy(buf.str());
  EXPECT_THROW(load_model(copy), FormatError);
  const auto loaded = load_composite(buf);
  ASSERT_EQ(loaded.state_count(), 3u);
  EXPECT_FALSE(loaded.per_state[1].has_value());
  for (EntityId s : {0u, 2u}) {
    EXPECT_EQ(loaded.per_state[s]->factors[0], composite.per_state[s]->factors[0]);
    EXPECT_EQ(loaded.per_state[s]->factors[1], composite.per_state[s]->factors[1]);
  }
  EXPECT_EQ(loaded.id_maps[0], composite.id_maps[0]);
}

}  // namespace
}  // namespace itals
