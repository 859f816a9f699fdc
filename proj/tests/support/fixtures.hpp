#pragma once

#include <cstdint>
#include <vector>

#include "reidrank/embedding_store.hpp"
#include "reidrank/rng.hpp"

namespace reidrank::testing {

/// Seeded set with uniform components in [-1, 1).
inline EmbeddingSet random_set(std::uint64_t seed, std::size_t count, std::uint32_t dim,
                               std::uint32_t labels = 5, std::uint16_t cameras = 3,
                               const char* tag = "fixture") {
  SeededRng rng(seed);
  EmbeddingSet set{tag, dim, {}};
  for (std::size_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    r.record_id = static_cast<std::uint32_t>(1000 + i);
    r.person_label = static_cast<std::uint32_t>(rng.below(labels));
    r.camera_id = static_cast<std::uint16_t>(rng.below(cameras));
    r.vector.resize(dim);
    for (float& v : r.vector) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    set.records.push_back(std::move(r));
  }
  return set;
}

/// Gaussian identity clusters: `per_identity` images around each random
/// center. The first image of each identity is the probe (camera 0), the
/// rest go to the gallery (camera 1).
struct ClusterSplit {
  EmbeddingSet probes;
  EmbeddingSet gallery;
};

inline ClusterSplit gaussian_clusters(std::uint64_t seed, std::size_t identities,
                                      std::size_t per_identity, std::uint32_t dim, double noise) {
  SeededRng rng(seed);
  ClusterSplit out{{"probe", dim, {}}, {"gallery", dim, {}}};
  std::uint32_t next_id = 0;
  for (std::size_t id = 0; id < identities; ++id) {
    std::vector<double> center(dim);
    for (double& c : center) c = rng.gaussian();
    for (std::size_t img = 0; img < per_identity; ++img) {
      EmbeddingRecord r;
      r.record_id = next_id++;
      r.person_label = static_cast<std::uint32_t>(id + 1);
      r.camera_id = img == 0 ? 0 : 1;
      r.vector.resize(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        r.vector[d] = static_cast<float>(center[d] + noise * rng.gaussian());
      }
      (img == 0 ? out.probes : out.gallery).records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace reidrank::testing
