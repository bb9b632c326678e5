#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "icas/cycling.hpp"
#include "icas/synthdata.hpp"

using namespace icas::cycle;
using namespace icas::synth;
using icas::num::ShapeError;

namespace {
double cosine(const icas::sim::Embedding& a, const icas::sim::Embedding& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.width(); ++i) {
        dot += a.vec[i] * b.vec[i];
        na += a.vec[i] * a.vec[i];
        nb += b.vec[i] * b.vec[i];
    }
    return dot / std::sqrt(na * nb);
}
}  // namespace

TEST_CASE("build_schedule: canonical assignments") {
    CHECK(build_schedule(1, 6).assignment ==
          std::vector<std::size_t>{0, 0, 0, 0, 0, 0});
    CHECK(build_schedule(3, 6).assignment ==
          std::vector<std::size_t>{0, 1, 2, 0, 1, 2});
    CHECK(build_schedule(4, 6).assignment ==
          std::vector<std::size_t>{0, 1, 2, 3, 0, 1});
}

TEST_CASE("build_schedule: rejects zero counts and more subjects than sites") {
    CHECK_THROWS_AS(build_schedule(0, 6), ShapeError);
    CHECK_THROWS_AS(build_schedule(2, 0), ShapeError);
    CHECK_THROWS_AS(build_schedule(7, 6), ShapeError);
    CHECK_NOTHROW(build_schedule(6, 6));
}

TEST_CASE("schedule matches independent modulus oracle exhaustively") {
    for (std::size_t L = 1; L <= 16; ++L)
        for (std::size_t k = 1; k <= std::min<std::size_t>(8, L); ++k) {
            auto s = build_schedule(k, L);
            CHECK(s.num_sites == L);
            REQUIRE(s.assignment.size() == L);
            for (std::size_t i = 0; i < L; ++i) {
                std::size_t want = i;
                while (want >= k) want -= k;  // repeated subtraction, not %
                CHECK(s.assignment[i] == want);
            }
        }
}

TEST_CASE("assignment counts are balanced up to the leading rotation") {
    for (std::size_t L = 1; L <= 16; ++L)
        for (std::size_t k = 1; k <= std::min<std::size_t>(8, L); ++k) {
            auto s = build_schedule(k, L);
            std::vector<std::size_t> counts(k, 0);
            for (auto idx : s.assignment) counts[idx]++;
            // every embedding is used either floor(L/k) or ceil(L/k) times,
            // with the extras going to the lowest indices
            for (std::size_t idx = 0; idx < k; ++idx) {
                std::size_t want = L / k + (idx < L % k ? 1 : 0);
                CHECK(counts[idx] == want);
            }
        }
}

TEST_CASE("embedding_for_site returns the scheduled item by reference") {
    Encoders enc = Encoders::make(16, 3, 5);
    SyntheticImage img = gen_content(11, 3);
    auto list = extract_content_embeddings(img, ExtractMode::Segmentation, enc);
    REQUIRE(list.count() == 3);
    auto sched = build_schedule(3, 6);

    CHECK(&embedding_for_site(sched, list, 0) == &list.items[0]);
    CHECK(&embedding_for_site(sched, list, 4) == &list.items[1]);
    CHECK(&embedding_for_site(sched, list, 5) == &list.items[2]);
    CHECK_THROWS_AS(embedding_for_site(sched, list, 6), ShapeError);
}

TEST_CASE("segmentation mode: one embedding per subject, distinct subjects differ") {
    Encoders enc = Encoders::make(16, 3, 5);
    SyntheticImage img = gen_content(7, 2);
    auto list = extract_content_embeddings(img, ExtractMode::Segmentation, enc);
    REQUIRE(list.count() == 2);
    CHECK(list.origins[0] == "subject:0");
    CHECK(list.origins[1] == "subject:1");
    CHECK(cosine(list.items[0], list.items[1]) < 0.99);
}

TEST_CASE("single full-image mask reduces to the plain encoding") {
    Encoders enc = Encoders::make(16, 3, 5);
    SyntheticImage img = gen_content(3, 1);
    SyntheticImage whole = img;
    whole.subject_masks = {Mask(img.image.width * img.image.height, 1)};
    auto list = extract_content_embeddings(whole, ExtractMode::Segmentation, enc);
    REQUIRE(list.count() == 1);
    auto plain = encode_content(img.image, enc);
    CHECK(list.items[0].vec.values() == plain.vec.values());
}

TEST_CASE("segmentation mode rejects images without masks") {
    Encoders enc = Encoders::make(16, 3, 5);
    SyntheticImage bare;
    bare.image = Image::filled(8, 8, 0.5, 0.5, 0.5);
    CHECK_THROWS_AS(extract_content_embeddings(bare, ExtractMode::Segmentation, enc),
                    ShapeError);
}

TEST_CASE("augmentation mode: identity, flip, jitter views") {
    Encoders enc = Encoders::make(16, 3, 5);
    SyntheticImage img = gen_content(19, 2);
    auto list = extract_content_embeddings(img, ExtractMode::Augmentation, enc);
    REQUIRE(list.count() == 3);
    CHECK(list.origins == std::vector<std::string>{"aug:identity", "aug:hflip",
                                                   "aug:jitter"});
    CHECK(list.items[0].vec.values() ==
          encode_content(img.image, enc).vec.values());

    // horizontally symmetric input: the flip view encodes identically
    SyntheticImage sym;
    sym.image = Image::filled(8, 8, 0.3, 0.6, 0.2);
    for (std::size_t y = 0; y < 8; ++y) {  // symmetric vertical stripes
        sym.image.at(y, 3, 0) = 0.9;
        sym.image.at(y, 4, 0) = 0.9;
    }
    sym.subject_masks = {Mask(64, 1)};
    auto views = extract_content_embeddings(sym, ExtractMode::Augmentation, enc);
    CHECK(views.items[0].vec.values() == views.items[1].vec.values());
}

TEST_CASE("embedding list validation") {
    ContentEmbeddingList empty;
    CHECK_THROWS_AS(empty.validate(), ShapeError);

    ContentEmbeddingList mixed;
    mixed.items.push_back(
        icas::sim::Embedding{icas::num::Tensor({2}, {1.0, 2.0})});
    mixed.items.push_back(
        icas::sim::Embedding{icas::num::Tensor({3}, {1.0, 2.0, 3.0})});
    CHECK_THROWS_AS(mixed.validate(), ShapeError);
}
