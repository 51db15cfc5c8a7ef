#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "grae/datasets.hpp"
#include "grae/error.hpp"
#include "oracles.hpp"

using namespace grae;

namespace {

std::vector<std::uint8_t> idx_bytes(std::uint32_t magic, std::vector<std::uint32_t> dims, std::size_t payload) {
    std::vector<std::uint8_t> b;
    auto be = [&](std::uint32_t v) {
        for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
    };
    be(magic);
    for (auto d : dims) be(d);
    for (std::size_t i = 0; i < payload; ++i) b.push_back(static_cast<std::uint8_t>(i * 37 % 256));
    return b;
}

ErrorCode code_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no error raised");
    return ErrorCode::ConfigError;
}

}  // namespace

TEST_CASE("synthetic generator: column norms, determinism, shapes") {
    SyntheticSpec s;
    const Dataset a = gen_synthetic(s, 3), b = gen_synthetic(s, 3);
    CHECK(a.x == b.x);
    CHECK(*a.z_true == *b.z_true);
    CHECK(a.size() == 4000);
    CHECK(a.dim() == 2);
    CHECK(std::abs(norm(a.w->col(0)) - 2.0) < 1e-12);
    CHECK(std::abs(norm(a.w->col(1)) - 1.0) < 1e-12);
    CHECK(gen_synthetic(s, 4).x != a.x);

    s.orthogonal_columns = true;
    const Dataset o = gen_synthetic(s, 3);
    CHECK(std::abs(dot(o.w->col(0), o.w->col(1))) < 1e-12);
    CHECK(std::abs(norm(o.w->col(0)) - 2.0) < 1e-12);
}

TEST_CASE("identity synthetic data has covariance W W^T + noise") {
    SyntheticSpec s;
    s.nu = ActivationKind::identity;
    const Dataset d = gen_synthetic(s, 5);
    const Matrix target = matmul_nt(*d.w, *d.w) + s.noise_std * s.noise_std * Matrix::identity(2);
    const double n = static_cast<double>(d.size());
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            double m = 0, m2 = 0;
            for (std::size_t r = 0; r < d.size(); ++r) {
                const double v = d.x(r, i) * d.x(r, j);
                m += v;
                m2 += v * v;
            }
            m /= n;
            CHECK(std::abs(m - target(i, j)) < 3.0 * std::sqrt((m2 / n - m * m) / n));
        }
}

TEST_CASE("IDX parsing") {
    const IdxArray a = parse_idx(idx_bytes(kIdxImageMagic, {3, 28, 28}, 3 * 784));
    CHECK(a.count() == 3);
    CHECK(a.item_size() == 784);
    CHECK(a.data.size() == 3 * 784);
    CHECK(parse_idx(idx_bytes(kIdxLabelMagic, {5}, 5)).item_size() == 1);
    CHECK(code_of([] { parse_idx(idx_bytes(1234, {3, 28, 28}, 3 * 784)); }) == ErrorCode::BadMagic);
    CHECK(code_of([] { parse_idx(idx_bytes(kIdxImageMagic, {3, 28, 28}, 3 * 784 - 1)); }) == ErrorCode::TruncatedFile);
    CHECK(code_of([] { parse_idx({0, 0}); }) == ErrorCode::TruncatedFile);
    CHECK(code_of([] { load_idx("/nonexistent/file.idx"); }) == ErrorCode::IoError);
}

TEST_CASE("pool_image") {
    std::vector<std::uint8_t> white(784, 255);
    for (double v : pool_image(white, 8)) CHECK(v == 1.0);
    std::vector<std::uint8_t> img(784);
    for (std::size_t i = 0; i < 784; ++i) img[i] = static_cast<std::uint8_t>((i * 13 + 7) % 256);
    const Vector full = pool_image(img, 28);
    for (std::size_t i = 0; i < 784; ++i) CHECK(full[i] == img[i] / 255.0);
    const Vector half = pool_image(img, 14);
    for (std::size_t r = 0; r < 14; ++r)
        for (std::size_t c = 0; c < 14; ++c) {
            double s = 0.0;
            for (std::size_t dr = 0; dr < 2; ++dr)
                for (std::size_t dc = 0; dc < 2; ++dc) s += img[(2 * r + dr) * 28 + 2 * c + dc];
            CHECK(half[r * 14 + c] == doctest::Approx(s / 4.0 / 255.0).epsilon(1e-14));
        }
    const Vector eight = pool_image(img, 8);
    for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t c = 0; c < 8; ++c) {
            double s = 0.0;
            for (std::size_t dr = 0; dr < 3; ++dr)
                for (std::size_t dc = 0; dc < 3; ++dc) s += img[(2 + 3 * r + dr) * 28 + 2 + 3 * c + dc];
            CHECK(eight[r * 8 + c] == doctest::Approx(s / 9.0 / 255.0).epsilon(1e-14));
        }
    CHECK_THROWS(pool_image(img, 10));
}

TEST_CASE("preprocess: range, selection and disjoint splits") {
    IdxArray images = parse_idx(idx_bytes(kIdxImageMagic, {10, 28, 28}, 10 * 784));
    const Dataset a = preprocess(images, 8, 6, 1);
    CHECK(a.size() == 6);
    CHECK(a.dim() == 64);
    for (double v : a.x.data()) CHECK((v >= 0.0 && v <= 1.0));
    CHECK(preprocess(images, 8, 6, 1).x == a.x);
    const Dataset rest = preprocess(images, 8, 100, 1, 6);
    CHECK(rest.size() == 4);
    CHECK(code_of([&] { preprocess(images, 8, 5, 1, 10); }) == ErrorCode::EmptySelection);
    const Dataset full = preprocess(images, 28, 10, 2);
    for (std::size_t i = 0; i < 10; ++i) {
        std::vector<std::uint8_t> bytes(784);
        for (std::size_t k = 0; k < 784; ++k) bytes[k] = static_cast<std::uint8_t>(std::lround(full.x(i, k) * 255.0));
        const Vector again = pool_image(bytes, 28);
        CHECK(std::equal(again.begin(), again.end(), full.x.row(i).begin()));
        bool found = false;
        for (std::size_t j = 0; j < 10 && !found; ++j)
            found = std::equal(bytes.begin(), bytes.end(), images.data.begin() + static_cast<std::ptrdiff_t>(j * 784));
        CHECK(found);
    }
}

TEST_CASE("dataset csv round trip") {
    Rng rng(1);
    const Matrix m = oracle::random_matrix(5, 3, rng);
    std::stringstream s;
    write_dataset_csv(s, m);
    std::string header;
    std::getline(std::stringstream(s.str()), header);
    CHECK(header == "0,1,2");
    CHECK(read_dataset_csv(s) == m);
}
