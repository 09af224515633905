#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "silo/error.hpp"
#include "silo/image.hpp"

using namespace silo;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("synthetic-data") {

TEST_CASE("generation is a pure function of the spec") {
    DatasetSpec spec;
    spec.train_count = 12;
    spec.test_count = 5;
    Dataset a = generate(spec);
    Dataset b = generate(spec);
    REQUIRE(a.train.size() == 12);
    REQUIRE(a.test.size() == 5);
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].pixels == b.train[i].pixels);
        CHECK(a.train[i].seed == b.train[i].seed);
    }
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(a.test[i].pixels == b.test[i].pixels);
    }
}

TEST_CASE("train and test seed ranges are disjoint") {
    DatasetSpec spec;
    spec.train_count = 10;
    spec.test_count = 10;
    Dataset ds = generate(spec);
    for (const auto& tr : ds.train) {
        for (const auto& te : ds.test) CHECK(tr.seed != te.seed);
    }
    CHECK(ds.train.front().seed == spec.master_seed);
    CHECK(ds.test.front().seed == spec.master_seed + spec.train_count);
}

TEST_CASE("1000 images stay in range and their pixel mean is centered") {
    DatasetSpec spec;
    spec.train_count = 1000;
    spec.test_count = 1;
    Dataset ds = generate(spec);
    double mean = 0.0;
    for (const auto& img : ds.train) {
        for (double p : img.pixels) {
            CHECK(p >= -1.0);
            CHECK(p <= 1.0);
            mean += p;
        }
    }
    mean /= static_cast<double>(1000 * spec.image_size * spec.image_size);
    CHECK(mean > -0.5);
    CHECK(mean < 0.5);
}

TEST_CASE("preconditions are enforced") {
    DatasetSpec spec;
    spec.image_size = 7;
    CHECK_THROWS_AS(generate(spec), ConfigError);
    spec.image_size = 16;
    spec.train_count = 0;
    CHECK_THROWS_AS(generate(spec), ConfigError);
}

TEST_CASE("pgm round-trip stays within half a quantization step") {
    const std::string path = temp_path("silo_test_roundtrip.pgm");
    ImageSample img = render_image(16, 42);
    write_pgm(img, path);
    ImageSample back = read_pgm(path);
    REQUIRE(back.size == img.size);
    double max_err = 0.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        max_err = std::max(max_err, std::abs(img.pixels[i] - back.pixels[i]));
    }
    CHECK(max_err <= 1.0 / 255.0 + 1e-12);
    std::remove(path.c_str());
}

TEST_CASE("constant zero image quantizes within 1/255") {
    const std::string path = temp_path("silo_test_zero.pgm");
    ImageSample img;
    img.size = 8;
    img.pixels.assign(64, 0.0);
    write_pgm(img, path);
    ImageSample back = read_pgm(path);
    for (double p : back.pixels) CHECK(std::abs(p) <= 1.0 / 255.0 + 1e-12);
    std::remove(path.c_str());
}

TEST_CASE("extreme values map to exact bytes and back") {
    // 1.0 -> byte 255 -> 1.0 and -1.0 -> byte 0 -> -1.0 under b/127.5 - 1
    const std::string path = temp_path("silo_test_extremes.pgm");
    ImageSample img;
    img.size = 8;
    img.pixels.assign(64, 1.0);
    img.pixels[0] = -1.0;
    write_pgm(img, path);
    ImageSample back = read_pgm(path);
    CHECK(back.pixels[0] == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(back.pixels[1] == doctest::Approx(1.0).epsilon(1e-15));
    std::remove(path.c_str());
}

TEST_CASE("malformed pgm files give structured parse errors") {
    const std::string path = temp_path("silo_test_bad.pgm");

    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("P6\n4 4\n255\n", f);
        std::fclose(f);
        CHECK_THROWS_AS(read_pgm(path), ParseError);
    }
    {
        // truncated pixel payload
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("P5\n4 4\n255\nabc", f);
        std::fclose(f);
        CHECK_THROWS_AS(read_pgm(path), ParseError);
    }
    {
        // non-square
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("P5\n2 3\n255\nabcdef", f);
        std::fclose(f);
        CHECK_THROWS_AS(read_pgm(path), ParseError);
    }
    {
        // bad maxval
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("P5\n2 2\n65535\nabcdabcd", f);
        std::fclose(f);
        CHECK_THROWS_AS(read_pgm(path), ParseError);
    }
    CHECK_THROWS_AS(read_pgm(temp_path("silo_no_such_file.pgm")), ParseError);
    std::remove(path.c_str());
}

}  // TEST_SUITE
