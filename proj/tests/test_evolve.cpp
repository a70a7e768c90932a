#include "doctest.h"

#include <cmath>
#include <random>

#include "fedevo/evolve.hpp"
#include "oracles.hpp"

using namespace fedevo;

namespace {

// sigma^2 = 1 and N_r = 1, so a freshly born cluster has identity covariance.
EvolvingModel unit_model(Eigen::Index d, EvolveConfig cfg = {}) {
    return EvolvingModel(Prototype{Vector::Ones(d), cfg.n_r}, cfg);
}

std::int64_t put(EvolvingModel& m, const Vector& at, std::int64_t n = 1, std::int64_t tick = 0) {
    Cluster c = Cluster::born(0, at, tick);
    c.n = n;
    return m.add_cluster(c);
}

Matrix three_blobs(std::uint64_t seed, std::vector<int>* labels) {
    std::mt19937_64 rng(seed);
    const std::vector<Vector> centers{Vector{{0.0, 0.0}}, Vector{{1.0, 0.0}}, Vector{{0.5, 0.85}}};
    std::vector<int> y;
    const Matrix X = oracle::blobs(rng, centers, 200, 0.05, &y);
    return oracle::shuffled_rows(X, labels ? (*labels = y, labels) : nullptr, seed + 1);
}

EvolvingModel fit_blobs(const Matrix& X) {
    // Prototype spread from the overall per-feature variance, as the server would provide.
    const Vector var = oracle::batch_cov(X).diagonal();
    EvolveConfig cfg;
    cfg.n_r = 1.0;
    cfg.kappa_n = 2;  // drops lone outliers
    EvolvingModel m(Prototype{var, cfg.n_r}, cfg);
    fit_stream(m, X);
    prune(m);
    return m;
}

}  // namespace

TEST_CASE("best match") {
    auto m = unit_model(2);
    SUBCASE("at the centre") {
        const auto id = put(m, Vector{{1.0, 1.0}});
        const Match hit = best_match(m, Vector{{1.0, 1.0}});
        CHECK(hit.id == id);
        CHECK(hit.membership == 1.0);
    }
    SUBCASE("ties go to the lower id") {
        const auto a = put(m, Vector::Zero(2));
        put(m, Vector::Zero(2));
        CHECK(best_match(m, Vector{{0.3, 0.2}}).id == a);
    }
    SUBCASE("nearest by distance") {
        const auto a = put(m, Vector::Zero(2));
        put(m, Vector{{10.0, 0.0}});
        const Match hit = best_match(m, Vector{{1.0, 0.0}});
        CHECK(hit.id == a);
        CHECK(hit.mahalanobis_sq == doctest::Approx(1.0));
    }
    SUBCASE("empty model") { CHECK_THROWS_AS(best_match(m, Vector::Zero(2)), EmptyModel); }
}

TEST_CASE("process sample") {
    SUBCASE("first sample is born") {
        auto m = unit_model(3);
        process_sample(m, Vector{{1.0, 2.0, 3.0}});
        REQUIRE(m.size() == 1);
        CHECK(m.clusters()[0].mu == Vector{{1.0, 2.0, 3.0}});
        CHECK(m.clusters()[0].n == 1);
        CHECK(m.tick() == 1);
    }
    SUBCASE("sample at a centre is absorbed") {
        auto m = unit_model(2);
        process_sample(m, Vector::Zero(2));
        process_sample(m, Vector::Zero(2));
        REQUIRE(m.size() == 1);
        CHECK(m.clusters()[0].n == 2);
        CHECK(m.clusters()[0].last_activation == 2);
    }
    // kappa_m below 1/2 switches merging off, so births stay visible.
    EvolveConfig no_merge;
    no_merge.kappa_m = 0.1;
    SUBCASE("sample exactly on the activation boundary is born") {
        auto m = unit_model(2, no_merge);
        process_sample(m, Vector::Zero(2));
        CHECK(m.activation_threshold() == doctest::Approx(std::exp(-1.0)));
        process_sample(m, Vector{{1.0, 1.0}});
        CHECK(m.size() == 2);
    }
    SUBCASE("either side of the boundary") {
        for (Eigen::Index d : {1, 2, 5, 16}) {
            const double r = std::sqrt(static_cast<double>(d));
            auto inside = unit_model(d, no_merge), outside = unit_model(d, no_merge);
            process_sample(inside, Vector::Zero(d));
            process_sample(outside, Vector::Zero(d));
            Vector x = Vector::Zero(d);
            x(0) = r * (1.0 - 1e-9);
            process_sample(inside, x);
            x(0) = r * (1.0 + 1e-9);
            process_sample(outside, x);
            CHECK(inside.size() == 1);
            CHECK(outside.size() == 2);
        }
    }
    SUBCASE("bad samples leave the model untouched") {
        auto m = unit_model(2);
        process_sample(m, Vector::Zero(2));
        CHECK_THROWS_AS(process_sample(m, Vector{{INFINITY, 0.0}}), RejectedSample);
        CHECK_THROWS_AS(process_sample(m, Vector::Zero(3)), DimensionMismatch);
        CHECK(m.tick() == 1);
        CHECK(m.clusters()[0].n == 1);
    }
}

TEST_CASE("candidate pairs") {
    auto m = unit_model(2);
    SUBCASE("far apart") {
        put(m, Vector::Zero(2));
        put(m, Vector{{50.0, 0.0}});
        CHECK(candidate_pairs(m).empty());
    }
    SUBCASE("coincident") {
        const auto a = put(m, Vector::Zero(2));
        const auto b = put(m, Vector::Zero(2));
        const auto pairs = candidate_pairs(m);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0] == ClusterPair{a, b});
    }
    SUBCASE("only the close pair") {
        put(m, Vector::Zero(2));
        const auto b = put(m, Vector{{10.0, 0.0}});
        const auto c = put(m, Vector{{10.5, 0.0}});
        const auto pairs = candidate_pairs(m);
        REQUIRE(pairs.size() == 1);
        CHECK(pairs[0] == ClusterPair{b, c});
    }
    SUBCASE("online mode only looks at clusters the focus activates") {
        put(m, Vector::Zero(2));
        put(m, Vector{{0.5, 0.0}});
        put(m, Vector{{10.0, 0.0}});
        put(m, Vector{{10.5, 0.0}});
        CHECK(candidate_pairs(m).size() == 2);
        CHECK(candidate_pairs(m, Vector{{0.25, 0.0}}).size() == 1);
    }
    SUBCASE("different classes never pair") {
        Cluster a = Cluster::born(0, Vector::Zero(2), 0, 0);
        Cluster b = Cluster::born(0, Vector::Zero(2), 0, 1);
        auto open = EvolvingModel(Prototype{Vector::Ones(2), 1.0}, EvolveConfig{});
        open.add_cluster(a);
        open.add_cluster(b);
        CHECK(candidate_pairs(open).empty());
    }
}

TEST_CASE("merge step") {
    auto m = unit_model(2);
    SUBCASE("nothing to merge") {
        put(m, Vector::Zero(2));
        put(m, Vector{{50.0, 0.0}});
        CHECK(merge_step(m, candidate_pairs(m)) == 0);
        CHECK(m.size() == 2);
    }
    SUBCASE("coincident clusters merge") {
        const auto a = put(m, Vector::Zero(2), 5);
        put(m, Vector::Zero(2), 5);
        CHECK(merge_step(m, candidate_pairs(m)) == 1);
        REQUIRE(m.size() == 1);
        CHECK(m.clusters()[0].n == 10);
        CHECK(m.clusters()[0].id == a);
    }
    SUBCASE("a chain terminates") {
        put(m, Vector::Zero(2), 3);
        put(m, Vector{{0.3, 0.0}}, 3);
        put(m, Vector{{0.6, 0.0}}, 3);
        const auto merges = merge_step(m, candidate_pairs(m));
        CHECK(merges <= 2);
        CHECK(m.size() >= 1);
        CHECK(m.size() + merges == 3);
        CHECK(m.total_count() == 9);
    }
    SUBCASE("volume cap blocks large merges") {
        EvolveConfig cfg;
        cfg.kappa_v = 1.0;
        auto tight = unit_model(2, cfg);
        put(tight, Vector::Zero(2), 5);
        put(tight, Vector{{1.0, 0.0}}, 5);
        CHECK(merge_step(tight, candidate_pairs(tight)) == 0);
    }
}

TEST_CASE("prune") {
    SUBCASE("kappa_n of one keeps everything") {
        auto m = unit_model(2);
        put(m, Vector::Zero(2), 1);
        put(m, Vector{{5.0, 0.0}}, 3);
        CHECK(prune(m) == 0);
        CHECK(m.size() == 2);
    }
    SUBCASE("small clusters go") {
        EvolveConfig cfg;
        cfg.kappa_n = 4;
        auto m = unit_model(2, cfg);
        put(m, Vector::Zero(2), 1);
        put(m, Vector{{5.0, 0.0}}, 5);
        put(m, Vector{{10.0, 0.0}}, 30);
        CHECK(prune(m) == 1);
        REQUIRE(m.size() == 2);
        CHECK(m.clusters()[0].n == 5);
    }
    SUBCASE("idle clusters go") {
        EvolveConfig cfg;
        cfg.age_limit = 100;
        auto m = unit_model(2, cfg);
        put(m, Vector::Zero(2), 10, 0);
        put(m, Vector{{5.0, 0.0}}, 10, 140);
        put(m, Vector{{9.0, 0.0}}, 10, 150);
        m.set_tick(150);
        CHECK(prune(m) == 1);
        CHECK(m.size() == 2);
    }
    SUBCASE("never empties the model") {
        EvolveConfig cfg;
        cfg.kappa_n = 100;
        auto m = unit_model(2, cfg);
        put(m, Vector::Zero(2), 3);
        put(m, Vector{{5.0, 0.0}}, 7);
        prune(m);
        REQUIRE(m.size() == 1);
        CHECK(m.clusters()[0].n == 7);
    }
}

TEST_CASE("fit stream") {
    SUBCASE("empty input") {
        auto m = unit_model(2);
        fit_stream(m, Matrix(0, 2));
        CHECK(m.empty());
        CHECK(m.tick() == 0);
    }
    SUBCASE("three blobs") {
        std::vector<int> y;
        const Matrix X = three_blobs(99, &y);
        const EvolvingModel m = fit_blobs(X);
        CHECK(m.size() == 3);
        std::vector<int> assign;
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            assign.push_back(static_cast<int>(best_match(m, Vector(X.row(i).transpose())).index));
        CHECK(oracle::ari(y, assign) >= 0.9);
        CHECK(m.total_count() >= 598);
    }
    SUBCASE("shuffles give similar counts") {
        const auto a = fit_blobs(three_blobs(1, nullptr));
        const auto b = fit_blobs(three_blobs(2, nullptr));
        CHECK(std::abs(static_cast<long>(a.size()) - static_cast<long>(b.size())) <= 1);
    }
    SUBCASE("no sample is lost") {
        std::mt19937_64 rng(4);
        const Matrix X = oracle::gaussian_rows(rng, 300, 3, 3.0);
        auto m = unit_model(3);
        fit_stream(m, X);
        CHECK(m.total_count() == 300);
        for (const auto& c : m.clusters()) CHECK(c.scatter.isApprox(c.scatter.transpose()));
    }
}
