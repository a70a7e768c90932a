#include "doctest.h"

#include <cmath>
#include <random>

#include "fedevo/classify.hpp"
#include "oracles.hpp"

using namespace fedevo;

namespace {

FisherStats fisher_from(const std::vector<std::vector<double>>& per_class_values) {
    FisherStats fs(static_cast<int>(per_class_values.size()), 1);
    for (std::size_t m = 0; m < per_class_values.size(); ++m)
        for (double v : per_class_values[m]) fs.push(Vector{{v}}, static_cast<int>(m));
    return fs;
}

EvolvingClassifier two_blob_classifier(Matrix* X_out, std::vector<int>* y_out) {
    std::mt19937_64 rng(8);
    std::vector<int> y;
    const Matrix X = oracle::shuffled_rows(
        oracle::blobs(rng, {Vector{{0.0, 0.0}}, Vector{{4.0, 4.0}}}, 100, 0.3, &y), &y, 9);
    EvolvingClassifier clf(2, 2, ClassifierConfig{}, Vector(Vector::Constant(2, 4.0)));
    for (Eigen::Index i = 0; i < X.rows(); ++i) clf.train_sample(X.row(i).transpose(), y[static_cast<std::size_t>(i)]);
    if (X_out) *X_out = X;
    if (y_out) *y_out = y;
    return clf;
}

}  // namespace

TEST_CASE("class encoding") {
    const auto e = ClassEncoding::one_hot(2, 4);
    CHECK(e.theta == std::vector<int>{0, 0, 1, 0});
    CHECK(e.decode() == 2);
    CHECK_THROWS_AS(ClassEncoding::one_hot(4, 4), InvalidArgument);
}

TEST_CASE("fisher scores") {
    SUBCASE("identical classes score zero") {
        const auto s = fisher_scores(fisher_from({{1, 2, 3}, {1, 2, 3}}));
        REQUIRE(s);
        CHECK((*s)(0) == doctest::Approx(0.0));
    }
    SUBCASE("separated classes score high") {
        const auto s = fisher_scores(fisher_from({{0, 0.1, -0.1}, {10, 10.1, 9.9}}));
        REQUIRE(s);
        // between: 3*25 + 3*25 = 150; within: 3*0.01 + 3*0.01 = 0.06
        CHECK((*s)(0) == doctest::Approx(2500.0));
    }
    SUBCASE("equal means score zero") {
        const auto s = fisher_scores(fisher_from({{-1, 0, 1}, {-10, 0, 10}}));
        REQUIRE(s);
        CHECK((*s)(0) == doctest::Approx(0.0));
    }
    SUBCASE("one class is not enough") { CHECK_FALSE(fisher_scores(fisher_from({{1, 2, 3}, {}}))); }
    SUBCASE("combining shards matches pooling") {
        const auto a = fisher_from({{0, 1}, {5}});
        const auto b = fisher_from({{2}, {6, 7}});
        const auto pooled = fisher_from({{0, 1, 2}, {5, 6, 7}});
        CHECK((*fisher_scores(combine_fisher(a, b)))(0) == doctest::Approx((*fisher_scores(pooled))(0)));
    }
}

TEST_CASE("feature selection") {
    CHECK(select_features(Vector{{10.0, 1.0, 0.01}}, 0.0) == FeatureMask{true, true, true});
    CHECK(select_features(Vector{{10.0, 1.0, 0.01}}, 0.05) == FeatureMask{true, true, false});
    CHECK(select_features(Vector{{0.0}}, 0.5) == FeatureMask{true});
    CHECK(select_features(Vector{{0.0, 0.0, 3.0}}, 1.0) == FeatureMask{false, false, true});
}

TEST_CASE("training routes samples to their class") {
    EvolvingClassifier clf(2, 2, ClassifierConfig{}, Vector(Vector::Ones(2)));
    clf.train_sample(Vector::Zero(2), 0);
    CHECK(clf.models()[0].size() == 1);
    CHECK(clf.models()[1].empty());
    clf.train_sample(Vector{{5.0, 5.0}}, 1);
    CHECK(clf.models()[0].size() == 1);
    CHECK(clf.models()[1].size() == 1);
    CHECK(clf.tick() == 2);
    CHECK(clf.models()[0].tick() == 2);
    CHECK_THROWS_AS(clf.train_sample(Vector::Zero(2), 2), InvalidArgument);
}

TEST_CASE("rules stay pure") {
    const auto clf = two_blob_classifier(nullptr, nullptr);
    for (int m = 0; m < 2; ++m) {
        CHECK_FALSE(clf.models()[static_cast<std::size_t>(m)].empty());
        for (const auto& c : clf.models()[static_cast<std::size_t>(m)].clusters()) CHECK(c.class_id == m);
    }
}

TEST_CASE("prediction") {
    Matrix X;
    std::vector<int> y;
    const auto clf = two_blob_classifier(&X, &y);

    SUBCASE("separable training data is fit exactly") {
        std::size_t hits = 0;
        for (Eigen::Index i = 0; i < X.rows(); ++i) hits += clf.predict(X.row(i).transpose()) == y[static_cast<std::size_t>(i)];
        CHECK(hits == y.size());
    }
    SUBCASE("rule centre scores one") {
        const Vector mu = clf.models()[1].clusters()[0].mu;
        CHECK(clf.predict(mu) == 1);
        CHECK(clf.predict_scores(mu)(1) == doctest::Approx(1.0));
    }
    SUBCASE("scores agree with predict") {
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> U(-2.0, 6.0);
        for (int i = 0; i < 100; ++i) {
            const Vector x{{U(rng), U(rng)}};
            const Vector s = clf.predict_scores(x);
            const Vector ls = clf.predict_log_scores(x);
            Eigen::Index best;
            ls.maxCoeff(&best);
            CHECK(clf.predict(x) == best);
            CHECK((s.array() <= 1.0).all());
            CHECK((s.array() >= 0.0).all());
        }
    }
    SUBCASE("far away points still rank") {
        const Vector ls = clf.predict_log_scores(Vector{{1e4, 1e4}});
        CHECK(std::isfinite(ls(0)));
        CHECK(std::isfinite(ls(1)));
        CHECK(clf.predict_scores(Vector{{1e4, 1e4}}).isZero());
    }
}

TEST_CASE("ties go to the lower class") {
    EvolvingClassifier clf(2, 1, ClassifierConfig{}, Vector(Vector::Ones(1)));
    clf.train_sample(Vector{{-1.0}}, 0);
    clf.train_sample(Vector{{1.0}}, 1);
    CHECK(clf.predict(Vector{{0.0}}) == 0);
}

TEST_CASE("untrained classifier refuses to predict") {
    EvolvingClassifier clf(3, 2, ClassifierConfig{});
    CHECK_THROWS_AS(clf.predict(Vector::Zero(2)), EmptyModel);
}

TEST_CASE("warm-up freezes a fisher mask") {
    ClassifierConfig cfg;
    cfg.kappa_f = 0.5;
    cfg.warmup = 40;
    std::mt19937_64 rng(12);
    std::normal_distribution<double> N(0.0, 1.0);
    EvolvingClassifier clf(2, 3, cfg);
    for (int i = 0; i < 80; ++i) {
        const int cls = i % 2;
        // Only feature 1 separates the classes.
        clf.train_sample(Vector{{N(rng), 10.0 * cls + N(rng), N(rng)}}, cls);
        if (i == 38) CHECK_FALSE(clf.mask());
    }
    REQUIRE(clf.mask());
    CHECK(*clf.mask() == FeatureMask{false, true, false});
    CHECK(clf.models()[0].dim() == 1);
    CHECK(clf.predict(Vector{{0.0, 10.0, 0.0}}) == 1);
    CHECK(clf.predict(Vector{{0.0, 0.0, 0.0}}) == 0);
}
