#include <gtest/gtest.h>

#include "framecs/random.hpp"
#include "framecs/transforms.hpp"

using namespace framecs;

TEST(Dft, SmallCases) {
  EXPECT_EQ(dft_matrix(1).mat(), Mat::Ones(1, 1));
  Mat V2 = dft_matrix(2).mat();
  Mat want(2, 2);
  want << 1, 1, 1, -1;
  want /= std::sqrt(2.0);
  EXPECT_LT((V2 - want).norm(), 1e-15);
  EXPECT_THROW(dft_matrix(0), Error);
  auto f = dft_frequencies(6);
  EXPECT_EQ(f, (std::vector<long>{0, 1, -1, 2, -2, 3}));
}

TEST(Dft, UnitaryAndConstantEnergy) {
  for (std::size_t n : {3u, 8u, 17u, 64u}) {
    Mat V = dft_matrix(n).mat();
    EXPECT_LE(op_norm(Mat(V.adjoint() * V - Mat::Identity(n, n)), Norm::two, Norm::two), 1e-10);
    EXPECT_LT((V.cwiseAbs().array() - 1 / std::sqrt(double(n))).abs().maxCoeff(), 1e-14);
    Vec y = V * Vec::Ones(n);
    EXPECT_NEAR(std::abs(y(0)), std::sqrt(double(n)), 1e-12);
    EXPECT_LT(y.tail(n - 1).norm(), 1e-12);
  }
  auto rng = make_rng(5, {0});
  Mat V = dft_matrix(32).mat();
  Vec x = gaussian_complex(rng, 32);
  EXPECT_NEAR((V * x).norm(), x.norm(), 1e-10);
}

// independent definition: entry by direct exponent of the signed frequency
TEST(Dft, MatchesDirectFormula) {
  const std::size_t n = 10;
  Mat V = dft_matrix(n).mat();
  long f[] = {0, 1, -1, 2, -2, 3, -3, 4, -4, 5};
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < n; ++j)
      EXPECT_LT(std::abs(V(r, j) - std::polar(1 / std::sqrt(10.0), -2 * M_PI * double(f[r]) * double(j) / 10)), 1e-13);
}

TEST(Haar, OrthobasisP1) {
  Mat D = haar_orthobasis(1).mat();
  Mat want(2, 2);
  want << 1, 1, 1, -1;
  want /= std::sqrt(2.0);
  EXPECT_LT((D - want).norm(), 1e-15);
}

TEST(Haar, OrthobasisProperties) {
  for (int p = 1; p <= 8; ++p) {
    Mat D = haar_orthobasis(p).mat();
    std::size_t N = std::size_t(1) << p;
    EXPECT_LE(op_norm(Mat(D * D.adjoint() - Mat::Identity(N, N)), Norm::two, Norm::two), 1e-10);
    for (std::size_t b = 1; b < N; ++b) EXPECT_LT(std::abs(D.row(b).sum()), 1e-12);
    EXPECT_LT((D.row(0).array() - std::pow(2.0, -p / 2.0)).abs().maxCoeff(), 1e-15);
  }
  Mat D2 = haar_orthobasis(2).mat();
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(D2.row(i).norm(), 1.0, 1e-15);
  // h_{1,1} for p = 2: support {3,4}, values +-2^{-1/2}
  EXPECT_NEAR(D2(3, 2).real(), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(D2(3, 3).real(), -std::sqrt(0.5), 1e-15);
  EXPECT_EQ(D2(3, 0), cplx(0));
}

TEST(Haar, FrameP1) {
  Mat D = haar_frame_redundant(1).mat();
  ASSERT_EQ(D.rows(), 4);
  EXPECT_LT((D.row(0) - D.row(1)).norm(), 1e-15);
  EXPECT_NEAR(D(0, 0).real(), 0.5, 1e-15);
  EXPECT_NEAR(D(0, 1).real(), 0.5, 1e-15);
  // shifted h_{0,0}: h~[1] = h[N]
  EXPECT_NEAR(D(3, 0).real(), -0.5, 1e-15);
  EXPECT_NEAR(D(3, 1).real(), 0.5, 1e-15);
}

TEST(Haar, FrameShiftDefinition) {
  const int p = 4;
  const std::size_t N = 16;
  Mat D = haar_frame_redundant(p).mat();
  Mat B = haar_orthobasis(p).mat() / std::sqrt(2.0);
  for (std::size_t b = 0; b < N; ++b) {
    EXPECT_LT((D.row(2 * b) - B.row(b)).norm(), 1e-15);
    for (std::size_t n = 0; n < N; ++n) EXPECT_LT(std::abs(D(2 * b + 1, n) - B(b, (n + N - 1) % N)), 1e-15);
  }
}

TEST(Haar, FrameParsevalAndBound) {
  for (int p = 1; p <= 8; ++p) {
    Mat D = haar_frame_redundant(p).mat();
    std::size_t N = std::size_t(1) << p;
    EXPECT_LE(op_norm(Mat(D.adjoint() * D - Mat::Identity(N, N)), Norm::two, Norm::two), 1e-10);
    EXPECT_LE(op_norm(matmul(D, Mat(D.adjoint())), Norm::inf, Norm::inf), 2 / (std::sqrt(2.0) - 1) + 1e-9);
  }
  auto rng = make_rng(6, {0});
  Mat D = haar_frame_redundant(6).mat();
  Vec x = gaussian_complex(rng, 64);
  EXPECT_LE((D.adjoint() * (D * x) - x).norm(), 1e-10);
}

TEST(Haar, Levels) {
  auto b3 = wavelet_levels(3, false), f3 = wavelet_levels(3, true);
  EXPECT_EQ(b3.boundaries(), (std::vector<std::size_t>{2, 4, 8}));
  EXPECT_EQ(f3.boundaries(), (std::vector<std::size_t>{4, 8, 16}));
  auto L = wavelet_levels(5, true);
  std::vector<int> hit(64, 0);
  for (std::size_t k = 1; k <= L.r(); ++k) {
    auto set = L.level_set(k, 64);
    for (auto j : set.indices()) hit[j - 1]++;
  }
  for (int h : hit) EXPECT_EQ(h, 1);
  // level k holds exactly the scale-(k-1) rows (plus scaling rows in level 1)
  for (std::size_t i = 2; i < 64; ++i) {
    auto a = haar::frame_atom(5, i);
    std::size_t scale = 5 - static_cast<std::size_t>(std::log2(double(a.len)));
    EXPECT_EQ(L.level_of(i + 1), std::max<std::size_t>(1, scale + 1));
  }
}

TEST(Fast, MatchesDense) {
  auto rng = make_rng(7, {0});
  for (std::size_t n : {1u, 2u, 5u, 16u, 100u}) {
    FastDft F(n);
    EXPECT_LT((materialize(F) - dft_matrix(n).mat()).norm(), 1e-12 * n);
    Vec y = gaussian_complex(rng, n);
    EXPECT_LT((F.apply_adjoint(y) - dft_matrix(n).mat().adjoint() * y).norm(), 1e-12 * n);
  }
  for (int p = 1; p <= 7; ++p) {
    for (bool frame : {false, true}) {
      FastHaar H(p, frame);
      Mat D = frame ? haar_frame_redundant(p).mat() : haar_orthobasis(p).mat();
      EXPECT_LT((materialize(H) - D).norm(), 1e-12);
      Vec z = gaussian_complex(rng, D.rows());
      EXPECT_LT((H.apply_adjoint(z) - D.adjoint() * z).norm(), 1e-12);
    }
  }
}
