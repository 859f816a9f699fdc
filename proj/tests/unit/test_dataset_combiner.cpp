#include <gtest/gtest.h>

#include <map>
#include <set>

#include "fixtures.hpp"
#include "reidrank/dataset_combiner.hpp"
#include "reidrank/error.hpp"

namespace reidrank {
namespace {

DatasetManifest manifest(const std::string& tag, std::uint32_t identities, std::size_t images,
                         std::uint32_t label_offset = 0) {
  DatasetManifest m{tag, identities, images, {}};
  for (std::size_t i = 0; i < images; ++i) {
    m.labels.push_back({static_cast<std::uint32_t>(i),
                        label_offset + static_cast<std::uint32_t>(i % identities)});
  }
  return m;
}

TEST(Merge, ThreePublicDatasetCounts) {
  const std::vector<DatasetManifest> ms{manifest("market1501", 751, 12936),
                                        manifest("cuhk03", 767, 7365),
                                        manifest("cuhk01", 971, 3884)};
  const auto c = merge_manifests(ms);
  EXPECT_EQ(c.identity_count, 2489u);
  EXPECT_EQ(c.image_count, 12936u + 7365u + 3884u);
  EXPECT_EQ(c.mapping.size(), 2489u);
  std::set<std::uint32_t> image;
  for (const auto& [key, label] : c.mapping) image.insert(label);
  EXPECT_EQ(*image.begin(), 1u);
  EXPECT_EQ(*image.rbegin(), 2489u);
  EXPECT_EQ(image.size(), 2489u);
}

TEST(Merge, SingleManifestIsBijection) {
  const auto c = merge_manifests(std::vector{manifest("a", 4, 10, 100)});
  EXPECT_EQ(c.identity_count, 4u);
  EXPECT_EQ(c.combined_label("a", 100), 1u);
  EXPECT_EQ(c.combined_label("a", 103), 4u);
}

TEST(Merge, SharedRawLabelsStayDistinct) {
  const std::vector<DatasetManifest> ms{manifest("a", 8, 8), manifest("b", 8, 8)};
  const auto c = merge_manifests(ms);
  EXPECT_NE(c.combined_label("a", 7), c.combined_label("b", 7));
  std::set<std::uint32_t> seen;
  for (const auto& [key, label] : c.mapping) EXPECT_TRUE(seen.insert(label).second);
}

TEST(Merge, AssignmentOrder) {
  DatasetManifest b{"b", 2, 2, {{0, 50}, {1, 9}}};
  DatasetManifest a{"a", 1, 1, {{0, 3}}};
  const auto c = merge_manifests(std::vector{b, a});
  EXPECT_EQ(c.combined_label("b", 9), 1u);
  EXPECT_EQ(c.combined_label("b", 50), 2u);
  EXPECT_EQ(c.combined_label("a", 3), 3u);
  ASSERT_EQ(c.records.size(), 3u);
  EXPECT_EQ(c.records[0].combined_label, 2u);
}

TEST(Merge, Errors) {
  auto expect_code = [](std::vector<DatasetManifest> ms, ErrorCode code) {
    try {
      merge_manifests(ms);
      ADD_FAILURE() << "accepted";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code);
    }
  };
  expect_code({manifest("a", 2, 2), manifest("a", 3, 3)}, ErrorCode::kDuplicateTag);
  expect_code({manifest(kCombinedTag, 2, 2)}, ErrorCode::kDuplicateTag);
  auto wrong_count = manifest("a", 2, 4);
  wrong_count.identity_count = 3;
  expect_code({wrong_count}, ErrorCode::kInvalidManifest);
  auto wrong_images = manifest("a", 2, 4);
  wrong_images.image_count = 5;
  expect_code({wrong_images}, ErrorCode::kInvalidManifest);
}

TEST(ApplyMapping, EmptySetAndDoubleApplication) {
  const auto c = merge_manifests(std::vector{manifest("a", 3, 3)});
  const EmbeddingSet empty{"a", 2, {}};
  const auto mapped = apply_mapping(empty, c);
  EXPECT_TRUE(mapped.empty());
  EXPECT_EQ(mapped.dataset_tag, kCombinedTag);
  EXPECT_THROW(apply_mapping(EmbeddingSet{"zzz", 2, {}}, c), Error);

  const EmbeddingSet set{"a", 1, {{0, 0, 0, {1}}, {1, 2, 0, {1}}}};
  const auto once = apply_mapping(set, c);
  EXPECT_EQ(once.records[0].person_label, 1u);
  EXPECT_EQ(once.records[1].person_label, 3u);
  try {
    apply_mapping(once, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownLabel);
  }
}

TEST(ApplyMapping, PreservesIdentityPartitionsAcrossThreeDatasets) {
  std::vector<EmbeddingSet> sets{testing::random_set(1, 60, 2, 9, 2, "d1"),
                                 testing::random_set(2, 40, 2, 6, 2, "d2"),
                                 testing::random_set(3, 50, 2, 9, 2, "d3")};
  std::vector<DatasetManifest> ms;
  for (const auto& s : sets) ms.push_back(DatasetManifest::from_set(s));
  const auto c = merge_manifests(ms);
  std::size_t total = 0;
  for (const auto& m : ms) total += m.identity_count;
  EXPECT_EQ(c.identity_count, total);

  std::map<std::uint32_t, std::string> owner;
  for (const auto& s : sets) {
    const auto mapped = apply_mapping(s, c);
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        EXPECT_EQ(s.records[i].person_label == s.records[j].person_label,
                  mapped.records[i].person_label == mapped.records[j].person_label);
      }
      auto [it, fresh] = owner.emplace(mapped.records[i].person_label, s.dataset_tag);
      EXPECT_EQ(it->second, s.dataset_tag);
      EXPECT_EQ(mapped.records[i].vector, s.records[i].vector);
    }
  }
}

}  // namespace
}  // namespace reidrank
