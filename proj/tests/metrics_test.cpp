#include "gradmix/metrics.hpp"

#include <cmath>
#include <gtest/gtest.h>

#include "gradmix/errors.hpp"
#include "gradmix/rng.hpp"

namespace gradmix {
namespace {

TEST(AverageAccuracyTest, TwoTaskMean) {
    AccuracyMatrix m;
    m.set_task_batches(2, 10);
    m.record(2, 10, 1, 0.8);
    m.record(2, 10, 2, 0.85);
    EXPECT_DOUBLE_EQ(average_accuracy(m, 2), 0.825);
}

TEST(AverageAccuracyTest, PerfectScoresAverageToOne) {
    AccuracyMatrix m;
    for (int k = 1; k <= 4; ++k) {
        m.set_task_batches(k, 3);
        for (int j = 1; j <= k; ++j) m.record(k, 3, j, 1.0);
    }
    for (int k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(average_accuracy(m, k), 1.0);
}

TEST(AverageAccuracyTest, SingleTaskIsItsOwnAccuracy) {
    AccuracyMatrix m;
    m.set_task_batches(1, 7);
    m.record(1, 7, 1, 0.62);
    EXPECT_DOUBLE_EQ(average_accuracy(m, 1), 0.62);
}

TEST(AverageAccuracyTest, MissingEntriesAreListed) {
    AccuracyMatrix m;
    m.set_task_batches(2, 5);
    m.record(2, 5, 2, 0.5);
    try {
        average_accuracy(m, 2);
        FAIL() << "expected MissingEntriesError";
    } catch (const MissingEntriesError& e) {
        EXPECT_NE(std::string(e.what()).find("a(2,5,1)"), std::string::npos);
    }
}

TEST(ForgettingTest, DirectSubstitution) {
    AccuracyMatrix m;
    m.set_task_batches(1, 4);
    m.set_task_batches(2, 4);
    m.record(1, 4, 1, 0.9);
    m.record(2, 4, 1, 0.8);
    m.record(2, 4, 2, 0.7);
    EXPECT_NEAR(forgetting(m, 2), 0.1, 1e-15);
}

TEST(ForgettingTest, ThreeTaskHandExample) {
    AccuracyMatrix m;
    for (int k = 1; k <= 3; ++k) m.set_task_batches(k, 2);
    m.record(1, 2, 1, 0.9);
    m.record(2, 2, 1, 0.7);
    m.record(3, 2, 1, 0.8);
    m.record(2, 2, 2, 0.9);
    m.record(3, 2, 2, 0.9);
    m.record(3, 2, 3, 0.95);
    // f_1 = max(0.9, 0.7) - 0.8 = 0.1; f_2 = 0.9 - 0.9 = 0
    EXPECT_NEAR(forgetting(m, 3), 0.05, 1e-15);
}

TEST(ForgettingTest, NonDroppingAccuraciesGiveNonpositive) {
    AccuracyMatrix m;
    for (int k = 1; k <= 3; ++k) m.set_task_batches(k, 1);
    m.record(1, 1, 1, 0.5);
    m.record(2, 1, 1, 0.6);
    m.record(2, 1, 2, 0.4);
    m.record(3, 1, 1, 0.7);
    m.record(3, 1, 2, 0.5);
    m.record(3, 1, 3, 0.9);
    EXPECT_LE(forgetting(m, 3), 0.0);
}

TEST(ForgettingTest, FrozenModelForgetsNothingExactly) {
    AccuracyMatrix m;
    Rng rng(4);
    const int T = 5;
    std::vector<double> acc(T + 1);
    for (int j = 1; j <= T; ++j) acc[j] = rng.uniform();
    for (int k = 1; k <= T; ++k) {
        m.set_task_batches(k, 3);
        for (int j = 1; j <= k; ++j) m.record(k, 3, j, acc[j]);
    }
    EXPECT_EQ(forgetting(m, T), 0.0);
}

TEST(ForgettingTest, UndefinedBelowTwoTasks) {
    AccuracyMatrix m;
    m.set_task_batches(1, 1);
    m.record(1, 1, 1, 0.9);
    EXPECT_THROW(forgetting(m, 1), UndefinedMetricError);
}

TEST(LcaTest, ZeroHorizonIsZeroShotAverage) {
    AccuracyMatrix m;
    m.record(1, 0, 1, 0.2);
    m.record(2, 0, 2, 0.4);
    EXPECT_DOUBLE_EQ(lca(m, 0, 2), 0.3);
}

TEST(LcaTest, AllOnesGiveOne) {
    AccuracyMatrix m;
    for (int k = 1; k <= 3; ++k) {
        for (int b = 0; b <= 5; ++b) m.record(k, b, k, 1.0);
    }
    EXPECT_DOUBLE_EQ(lca(m, 5, 3), 1.0);
}

TEST(LcaTest, TwoTaskHandExample) {
    AccuracyMatrix m;
    m.record(1, 0, 1, 0.1);
    m.record(1, 1, 1, 0.5);
    m.record(2, 0, 2, 0.2);
    m.record(2, 1, 2, 0.6);
    // Z_0 = 0.15, Z_1 = 0.55
    EXPECT_DOUBLE_EQ(lca(m, 1, 2), 0.35);
}

TEST(LcaTest, MissingEntriesRaise) {
    AccuracyMatrix m;
    m.record(1, 0, 1, 0.1);
    EXPECT_THROW(lca(m, 1, 1), MissingEntriesError);
}

TEST(AccuracyMatrixTest, RejectsOutOfRangeValues) {
    AccuracyMatrix m;
    EXPECT_THROW(m.record(1, 0, 1, 1.5), std::invalid_argument);
    EXPECT_THROW(m.record(1, 0, 1, -0.1), std::invalid_argument);
    EXPECT_THROW(m.record(0, 0, 1, 0.5), std::invalid_argument);
}

TEST(AccuracyMatrixTest, CsvRoundTripIsExact) {
    AccuracyMatrix m;
    Rng rng(9);
    for (int k = 1; k <= 4; ++k) {
        m.set_task_batches(k, 6);
        for (int b = 0; b <= 2; ++b) m.record(k, b, k, rng.uniform());
        for (int j = 1; j <= k; ++j) m.record(k, 6, j, rng.uniform());
    }
    const std::string csv = m.to_csv();
    const AccuracyMatrix back = AccuracyMatrix::from_csv(csv);
    EXPECT_EQ(back.entries(), m.entries());
    EXPECT_EQ(back.to_csv(), csv);

    // serialized indices are 0-based
    EXPECT_NE(csv.find("\n0,0,0,"), std::string::npos);
}

TEST(AccuracyMatrixTest, MetricsFromSerializedMatrixMatchNaiveRecomputation) {
    AccuracyMatrix m;
    Rng rng(10);
    const int T = 5;
    for (int k = 1; k <= T; ++k) {
        m.set_task_batches(k, 8);
        for (int b = 0; b <= 3; ++b) m.record(k, b, k, rng.uniform());
        for (int j = 1; j <= k; ++j) m.record(k, 8, j, rng.uniform());
    }
    const AccuracyMatrix back = AccuracyMatrix::from_csv(m.to_csv());

    // naive A_T
    double sum = 0.0;
    for (int j = 1; j <= T; ++j) sum += m.at(T, 8, j);
    EXPECT_EQ(average_accuracy(back, T), sum / T);

    // naive F_T with an explicit max loop
    double fsum = 0.0;
    for (int j = 1; j <= T - 1; ++j) {
        double best = -1.0;
        for (int l = j; l <= T - 1; ++l) best = std::max(best, m.at(l, 8, j));
        fsum += best - m.at(T, 8, j);
    }
    EXPECT_EQ(forgetting(back, T), fsum / (T - 1));

    // naive LCA_3
    double z = 0.0;
    for (int b = 0; b <= 3; ++b) {
        double inner = 0.0;
        for (int k = 1; k <= T; ++k) inner += m.at(k, b, k);
        z += inner / T;
    }
    EXPECT_EQ(lca(back, 3, T), z / 4.0);
}

}  // namespace
}  // namespace gradmix
