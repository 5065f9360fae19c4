#include <cmath>
#include <map>
#include <random>
#include <tuple>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "coolheat/half_integer.hpp"
#include "coolheat/wigner.hpp"

using namespace coolheat;
using namespace coolheat::literals;

namespace {

// Clebsch-Gordan coefficients from angular-momentum operators: |J J> is the
// J^2 eigenvector in the M = J block (Condon-Shortley sign), and lower M
// follow by repeated J-. Shares nothing with the Racah sum.
class CgOracle {
 public:
  CgOracle(int tj1, int tj2) : tj1_(tj1), tj2_(tj2) {
    const int d1 = tj1 + 1, d2 = tj2 + 1, n = d1 * d2;
    auto lower = [](int tj) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(tj + 1, tj + 1);
      // basis index k <-> m = j - k
      for (int k = 0; k < tj; ++k) {
        double j = tj / 2.0, mm = j - k;
        m(k + 1, k) = std::sqrt(j * (j + 1) - mm * (mm - 1));
      }
      return m;
    };
    auto jz = [](int tj) {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(tj + 1, tj + 1);
      for (int k = 0; k <= tj; ++k) m(k, k) = tj / 2.0 - k;
      return m;
    };
    auto kron = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
      Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
      for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
      return out;
    };
    Eigen::MatrixXd i1 = Eigen::MatrixXd::Identity(d1, d1), i2 = Eigen::MatrixXd::Identity(d2, d2);
    Eigen::MatrixXd lm = kron(lower(tj1), i2) + kron(i1, lower(tj2));
    Eigen::MatrixXd z = kron(jz(tj1), i2) + kron(i1, jz(tj2));
    Eigen::MatrixXd lp = lm.transpose();
    Eigen::MatrixXd j2 = z * z + 0.5 * (lp * lm + lm * lp);

    for (int tJ = std::abs(tj1 - tj2); tJ <= tj1 + tj2; tJ += 2) {
      std::vector<int> block;
      for (int k = 0; k < n; ++k)
        if (std::lround(2 * z(k, k)) == tJ) block.push_back(k);
      Eigen::MatrixXd sub(block.size(), block.size());
      for (std::size_t a = 0; a < block.size(); ++a)
        for (std::size_t b = 0; b < block.size(); ++b) sub(a, b) = j2(block[a], block[b]);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
      double J = tJ / 2.0, target = J * (J + 1);
      int pick = 0;
      for (int e = 0; e < es.eigenvalues().size(); ++e)
        if (std::abs(es.eigenvalues()(e) - target) < std::abs(es.eigenvalues()(pick) - target)) pick = e;
      Eigen::VectorXd top = Eigen::VectorXd::Zero(n);
      for (std::size_t a = 0; a < block.size(); ++a) top(block[a]) = es.eigenvectors()(a, pick);
      // Condon-Shortley: <j1 j1; j2 J-j1 | J J> > 0.
      int ref = -1;
      for (int k = 0; k < n; ++k)
        if (k / d2 == 0 && std::abs(top(k)) > 1e-9) ref = k;
      if (ref < 0 || top(ref) < 0) top = -top;
      Eigen::VectorXd v = top;
      for (int tM = tJ; tM >= -tJ; tM -= 2) {
        states_[{tJ, tM}] = v;
        if (tM > -tJ) {
          v = lm * v;
          v.normalize();
        }
      }
    }
  }

  // <j1 m1; j2 m2 | J M>
  double cg(int tm1, int tm2, int tJ, int tM) const {
    if (tm1 + tm2 != tM) return 0.0;
    auto it = states_.find({tJ, tM});
    if (it == states_.end()) return 0.0;
    int k1 = (tj1_ - tm1) / 2, k2 = (tj2_ - tm2) / 2;
    return it->second(k1 * (tj2_ + 1) + k2);
  }

 private:
  int tj1_, tj2_;
  std::map<std::pair<int, int>, Eigen::VectorXd> states_;
};

double oracle_3j(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3) {
  if (tm1 + tm2 + tm3 != 0) return 0.0;
  if (tj3 > tj1 + tj2 || tj3 < std::abs(tj1 - tj2) || (tj1 + tj2 + tj3) % 2) return 0.0;
  CgOracle o(tj1, tj2);
  int phase2 = tj1 - tj2 - tm3;  // twice (j1 - j2 - m3), always even here
  double sign = (phase2 / 2) % 2 == 0 ? 1.0 : -1.0;
  return sign / std::sqrt(tj3 + 1.0) * o.cg(tm1, tm2, tj3, -tm3);
}

double w3(int tj1, int tj2, int tj3, int tm1, int tm2, int tm3) {
  return wigner_3j(HalfInt::from_twice(tj1), HalfInt::from_twice(tj2), HalfInt::from_twice(tj3),
                   HalfInt::from_twice(tm1), HalfInt::from_twice(tm2), HalfInt::from_twice(tm3));
}

}  // namespace

TEST(HalfInt, ParsesAndPrints) {
  EXPECT_EQ(HalfInt::parse("5/2").twice(), 5);
  EXPECT_EQ(HalfInt::parse("-1/2").twice(), -1);
  EXPECT_EQ(HalfInt::parse("+3/2").twice(), 3);
  EXPECT_EQ(HalfInt::parse("2").twice(), 4);
  EXPECT_EQ(HalfInt::parse("4/2").twice(), 4);
  EXPECT_EQ((5_half).str(), "5/2");
  EXPECT_EQ((1_half).str(true), "+1/2");
  EXPECT_EQ((-(3_half)).str(true), "-3/2");
  EXPECT_THROW(HalfInt::parse("1/3"), ConfigError);
  EXPECT_THROW(HalfInt::parse("x"), ConfigError);
  EXPECT_THROW(HalfInt::parse(""), ConfigError);
}

TEST(HalfInt, Arithmetic) {
  EXPECT_EQ(5_half - 3_half, HalfInt::integer(1));
  EXPECT_TRUE((5_half + 1_half).is_integer());
  EXPECT_DOUBLE_EQ((5_half).value(), 2.5);
  EXPECT_EQ(abs(-(5_half)), 5_half);
}

TEST(Wigner3j, KnownValues) {
  EXPECT_EQ(wigner_3j(1_half, 2_half, 5_half, 1_half, 2_half, -(3_half)), 0.0);
  EXPECT_EQ(wigner_3j(2_half, 2_half, 0_half, 2_half, -(2_half), 2_half), 0.0);
  EXPECT_NEAR(std::abs(wigner_3j(1_half, 2_half, 3_half, 1_half, 2_half, -(3_half))), 0.5, 1e-15);
}

TEST(Wigner3j, DomainErrors) {
  EXPECT_THROW(wigner_3j(1_half, 2_half, 3_half, 2_half, 0_half, -(2_half)), DomainError);  // m - j half-odd
  EXPECT_EQ(wigner_3j(1_half, 2_half, 3_half, 3_half, 0_half, -(3_half)), 0.0);             // |m| > j
}

TEST(Wigner3j, MatchesOperatorOracleExhaustively) {
  int checked = 0;
  for (int tj1 = 0; tj1 <= 6; ++tj1)
    for (int tj2 = 0; tj2 <= 6; ++tj2)
      for (int tj3 = std::abs(tj1 - tj2); tj3 <= std::min(tj1 + tj2, 6); tj3 += 2)
        for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2)
          for (int tm2 = -tj2; tm2 <= tj2; tm2 += 2) {
            int tm3 = -tm1 - tm2;
            if (std::abs(tm3) > tj3) continue;
            ASSERT_NEAR(w3(tj1, tj2, tj3, tm1, tm2, tm3), oracle_3j(tj1, tj2, tj3, tm1, tm2, tm3), 1e-12)
                << tj1 << ' ' << tj2 << ' ' << tj3 << ' ' << tm1 << ' ' << tm2;
            ++checked;
          }
  EXPECT_GT(checked, 500);
}

TEST(Wigner3j, OrthogonalitySumRule) {
  for (int tj1 = 0; tj1 <= 6; ++tj1)
    for (int tj2 = 0; tj2 <= 6; ++tj2)
      for (int tj3 = std::abs(tj1 - tj2); tj3 <= std::min(tj1 + tj2, 6); tj3 += 2)
        for (int tm3 = -tj3; tm3 <= tj3; tm3 += 2) {
          double s = 0.0;
          for (int tm1 = -tj1; tm1 <= tj1; tm1 += 2) {
            int tm2 = -tm1 - tm3;
            if (std::abs(tm2) <= tj2) s += std::pow(w3(tj1, tj2, tj3, tm1, tm2, tm3), 2);
          }
          EXPECT_NEAR((tj3 + 1) * s, 1.0, 1e-12);
        }
}

TEST(Wigner3j, PermutationSymmetry) {
  std::mt19937 rng(20261014);
  int done = 0;
  while (done < 100) {
    int t[3], m[3];
    for (int& x : t) x = static_cast<int>(rng() % 7);
    if ((t[0] + t[1] + t[2]) % 2 || t[2] > t[0] + t[1] || t[2] < std::abs(t[0] - t[1])) continue;
    m[0] = -t[0] + 2 * static_cast<int>(rng() % (t[0] + 1));
    m[1] = -t[1] + 2 * static_cast<int>(rng() % (t[1] + 1));
    m[2] = -m[0] - m[1];
    if (std::abs(m[2]) > t[2]) continue;
    ++done;
    double v = w3(t[0], t[1], t[2], m[0], m[1], m[2]);
    double odd = ((t[0] + t[1] + t[2]) / 2) % 2 ? -1.0 : 1.0;
    EXPECT_NEAR(v, oracle_3j(t[0], t[1], t[2], m[0], m[1], m[2]), 1e-12);
    EXPECT_NEAR(w3(t[1], t[2], t[0], m[1], m[2], m[0]), v, 1e-13);
    EXPECT_NEAR(w3(t[2], t[0], t[1], m[2], m[0], m[1]), v, 1e-13);
    EXPECT_NEAR(w3(t[1], t[0], t[2], m[1], m[0], m[2]), odd * v, 1e-13);
    EXPECT_NEAR(w3(t[0], t[2], t[1], m[0], m[2], m[1]), odd * v, 1e-13);
    EXPECT_NEAR(w3(t[0], t[1], t[2], -m[0], -m[1], -m[2]), odd * v, 1e-13);
  }
}

TEST(Wigner3j, LargeArgumentsStayExact) {
  // Stretched case (j j 2j; j j -2j) = (-1)^(2j) / sqrt(4j+1) for every j.
  for (int tj = 1; tj <= 40; ++tj)
    EXPECT_NEAR(w3(tj, tj, 2 * tj, tj, tj, -2 * tj), (tj % 2 ? -1.0 : 1.0) / std::sqrt(2 * tj + 1.0), 1e-14);
}
