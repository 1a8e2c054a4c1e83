/* Copyright 2026 The Waterbird Count Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include "waterbird/dataset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "waterbird/random.hpp"
#include "waterbird/taxonomy.hpp"

namespace waterbird {
namespace {

TEST(TaxonomyTest, BuiltInShape) {
  const auto t = ClassTaxonomy::waterbirds();
  EXPECT_EQ(t.raw_classes().size(), 24u);
  ASSERT_EQ(t.trained_classes().size(), 16u);
  EXPECT_EQ(t.trained_classes().back(), "Other");
  std::size_t to_other = 0;
  for (const auto& r : t.raw_classes()) to_other += r.trained == "Other";
  EXPECT_EQ(to_other, 9u);
  EXPECT_EQ(t.minority_set(),
            (std::set<std::string>{"Brown Pelican Adult", "White Ibis Adult", "Reddish Egret Adult",
                                   "Tri-colored Heron Adult", "Great Blue Heron Adult",
                                   "Roseate Spoonbill Adult", "Brown Pelican Chick"}));
}

TEST(TaxonomyTest, FoldIsTotalAndSurjective) {
  const auto t = ClassTaxonomy::waterbirds();
  std::set<std::string> image;
  for (const auto& r : t.raw_classes()) {
    auto folded = t.fold(r.name);
    ASSERT_TRUE(folded);
    EXPECT_TRUE(t.contains(*folded));
    EXPECT_EQ(t.fold(r.abbreviation), folded);
    image.insert(*folded);
  }
  EXPECT_EQ(image.size(), 16u);
  EXPECT_EQ(t.fold("Great Egret Adult"), "Other");
  EXPECT_FALSE(t.fold("Dodo Adult"));
}

TEST(TaxonomyTest, JsonRoundTripAndValidation) {
  const auto t = ClassTaxonomy::waterbirds();
  const auto back = ClassTaxonomy::from_json(t.to_json());
  EXPECT_EQ(back.trained_classes(), t.trained_classes());
  EXPECT_EQ(back.minority_set(), t.minority_set());
  EXPECT_EQ(back.raw_classes().size(), t.raw_classes().size());

  auto j = t.to_json();
  j["raw_classes"][0]["trained"] = "Nonexistent";
  EXPECT_THROW(ClassTaxonomy::from_json(j), InputError);
  j = t.to_json();
  j["minority"].push_back("Nonexistent");
  EXPECT_THROW(ClassTaxonomy::from_json(j), InputError);
}

AnnotationSet load(const std::string& text, const std::map<std::string, SurveyImage>& images = {}) {
  std::istringstream in(text);
  return load_annotations(in, ClassTaxonomy::waterbirds(), images);
}

constexpr const char* kHeader = "image_id,class_name,x_min,y_min,x_max,y_max\n";

TEST(LoadAnnotationsTest, FoldsUnlistedRawClassIntoOther) {
  const auto set = load(std::string(kHeader) + "img1,Great Egret Adult,10,20,30,40\n");
  ASSERT_EQ(set.size(), 1u);
  const auto& a = set.by_image.at("img1").front();
  EXPECT_EQ(a.class_name, "Other");
  EXPECT_EQ(a.box, BoundingBox(10, 20, 30, 40));
}

TEST(LoadAnnotationsTest, EmptyFileAndHeaderOnly) {
  EXPECT_EQ(load("").size(), 0u);
  EXPECT_EQ(load(kHeader).size(), 0u);
}

TEST(LoadAnnotationsTest, MalformedRowsCarryLineNumbers) {
  try {
    load(std::string(kHeader) + "img1,LAGUA,1,1,5,5\nimg1,LAGUA,30,1,20,5\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  EXPECT_THROW(load(std::string(kHeader) + "img1,LAGUA,1,1,5\n"), ParseError);
  EXPECT_THROW(load(std::string(kHeader) + "img1,LAGUA,1,x,5,5\n"), ParseError);
  EXPECT_THROW(load("id,cls,a,b,c,d\n"), ParseError);
}

TEST(LoadAnnotationsTest, UnknownClassesAreQuarantined) {
  const auto set = load(std::string(kHeader) +
                        "img1,Dodo Adult,1,1,5,5\n"
                        "img1,Laughing Gull Adult,1.5,1,5.25,5\n"
                        "\"img2\",\"Mixed Tern Adult\", 0 , 0 , 3 , 3\r\n");
  EXPECT_EQ(set.size(), 2u);
  ASSERT_EQ(set.rejects.size(), 1u);
  EXPECT_EQ(set.rejects[0].line, 2u);
  EXPECT_EQ(set.rejects[0].class_name, "Dodo Adult");
  EXPECT_EQ(set.by_image.at("img2").front().box, BoundingBox(0, 0, 3, 3));
}

TEST(LoadAnnotationsTest, BoxesMustFitTheirImage) {
  std::map<std::string, SurveyImage> images;
  images["img1"] = SurveyImage{"img1", "", 100, 50, std::nullopt};
  EXPECT_NO_THROW(load(std::string(kHeader) + "img1,LAGUA,0,0,100,50\n", images));
  EXPECT_THROW(load(std::string(kHeader) + "img1,LAGUA,90,40,101,50\n", images), OutOfBounds);
  const auto set = load(std::string(kHeader) + "img9,LAGUA,0,0,10,10\n", images);
  EXPECT_EQ(set.rejects.size(), 1u);
}

std::vector<std::string> tile_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("tile_" + std::to_string(i));
  return ids;
}

TEST(SplitTest, SeventyFifteenFifteen) {
  const auto s = split_dataset(tile_ids(100), {}, 7);
  EXPECT_EQ(s.train.size(), 70u);
  EXPECT_EQ(s.validation.size(), 15u);
  EXPECT_EQ(s.test.size(), 15u);
}

TEST(SplitTest, SingleTileGoesToTraining) {
  const auto s = split_dataset({"only"}, {}, 3);
  EXPECT_EQ(s.train, std::vector<std::string>{"only"});
  EXPECT_TRUE(s.validation.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(SplitTest, BadRatios) {
  EXPECT_THROW(split_dataset(tile_ids(3), {0.7, 0.2, 0.2}), BadRatios);
  EXPECT_THROW(split_dataset(tile_ids(3), {1.0, 0.0, 0.0}), BadRatios);
  EXPECT_NO_THROW(split_dataset(tile_ids(3), {0.5, 0.25, 0.25}));
}

TEST(SplitTest, OrderIndependentAndSeedSensitive) {
  auto ids = tile_ids(100);
  const auto a = split_dataset(ids, {}, 7);
  Rng rng(99);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);
  const auto b = split_dataset(ids, {}, 7);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);
  EXPECT_NE(split_dataset(ids, {}, 8).train, a.train);
}

TEST(SplitTest, PartitionPropertyOnRandomInputs) {
  Rng rng(2024);
  for (int round = 0; round < 200; ++round) {
    const std::size_t n = rng.below(300);
    const auto ids = tile_ids(n);
    const auto s = split_dataset(ids, {}, rng.below(1000));
    std::set<std::string> all;
    for (const auto* bucket : {&s.train, &s.validation, &s.test}) {
      for (const auto& id : *bucket) ASSERT_TRUE(all.insert(id).second) << "duplicate " << id;
    }
    ASSERT_EQ(all, std::set<std::string>(ids.begin(), ids.end()));
    const double dn = static_cast<double>(n);
    ASSERT_LE(std::abs(static_cast<double>(s.train.size()) - 0.70 * dn), 1.0);
    ASSERT_LE(std::abs(static_cast<double>(s.validation.size()) - 0.15 * dn), 1.0);
    ASSERT_LE(std::abs(static_cast<double>(s.test.size()) - 0.15 * dn), 1.0);
  }
}

TEST(SplitTest, ByGroupKeepsImagesTogether) {
  std::map<std::string, std::string> group_of;
  for (int img = 0; img < 20; ++img) {
    for (int t = 0; t < 5; ++t) {
      group_of["im" + std::to_string(img) + "_" + std::to_string(t)] = "im" + std::to_string(img);
    }
  }
  const auto s = split_by_group(group_of, {}, 1);
  EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), 100u);
  std::map<std::string, std::set<int>> buckets;
  int b = 0;
  for (const auto* bucket : {&s.train, &s.validation, &s.test}) {
    for (const auto& id : *bucket) buckets[group_of[id]].insert(b);
    ++b;
  }
  for (const auto& [img, in] : buckets) EXPECT_EQ(in.size(), 1u) << img;
  EXPECT_EQ(s.train.size(), 70u);  // 14 of 20 images
}

TEST(HistogramTest, Examples) {
  const auto taxonomy = ClassTaxonomy::waterbirds();
  const std::vector<Annotation> none;
  const auto empty = class_histogram(none, taxonomy);
  EXPECT_EQ(empty.size(), 16u);
  for (const auto& [c, n] : empty) EXPECT_EQ(n, 0u);

  std::vector<Annotation> anns;
  for (int i = 0; i < 3; ++i) anns.push_back({"i", "Laughing Gull Adult", BoundingBox(0, 0, 1, 1)});
  anns.push_back({"i", "Other", BoundingBox(0, 0, 1, 1)});
  const auto h = class_histogram(anns);
  EXPECT_EQ(h, (ClassHistogram{{"Laughing Gull Adult", 3}, {"Other", 1}}));
}

TEST(HistogramTest, LongTailFixtureAndAlgebra) {
  const auto taxonomy = ClassTaxonomy::waterbirds();
  // Class i appears 2^(15-i) times: a long tail with known counts.
  std::vector<Annotation> anns;
  ClassHistogram expected;
  for (std::size_t i = 0; i < taxonomy.size(); ++i) {
    const std::size_t n = std::size_t{1} << (15 - i);
    expected[taxonomy.trained_classes()[i]] = n;
    for (std::size_t k = 0; k < n; ++k) {
      anns.push_back({"img", taxonomy.trained_classes()[i], BoundingBox(0, 0, 1, 1)});
    }
  }
  EXPECT_EQ(class_histogram(anns, taxonomy), expected);

  Rng rng(4);
  auto shuffled = anns;
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::swap(shuffled[i - 1], shuffled[rng.below(i)]);
  }
  EXPECT_EQ(class_histogram(shuffled, taxonomy), expected);

  const std::vector<Annotation> front(anns.begin(), anns.begin() + 1000);
  const std::vector<Annotation> back(anns.begin() + 1000, anns.end());
  auto sum = class_histogram(front, taxonomy);
  for (const auto& [c, n] : class_histogram(back, taxonomy)) sum[c] += n;
  EXPECT_EQ(sum, expected);
}

}  // namespace
}  // namespace waterbird
