#include "doctest.h"

#include <algorithm>
#include <random>
#include <set>

#include "fedevo/federate.hpp"
#include "fedevo/parallel.hpp"
#include "fedevo/snapshot.hpp"
#include "oracles.hpp"

using namespace fedevo;

namespace {

Matrix blob_rows(std::uint64_t seed, const std::vector<Vector>& centers, int per = 100) {
    std::mt19937_64 rng(seed);
    return oracle::shuffled_rows(oracle::blobs(rng, centers, per, 0.05), nullptr, seed + 7);
}

ModelSnapshot owner_snapshot(const Matrix& X, const std::string& name, double sigma2 = 0.2) {
    EvolveConfig cfg;
    EvolvingModel m(Prototype{Vector::Constant(X.cols(), sigma2), 1.0}, cfg);
    fit_stream(m, X);
    return snapshot_of(m, name);
}

const std::vector<Vector> kThree{Vector{{0.0, 0.0}}, Vector{{1.0, 0.0}}, Vector{{0.5, 0.85}}};

RoundOptions iris_round(std::uint64_t seed) {
    RoundOptions ro;
    ro.seed = seed;
    ro.owner.evolve.n_r = 4.0;
    ro.owner.evolve.kappa_n = 2;
    ro.server.config = ro.owner.evolve;
    return ro;
}

}  // namespace

TEST_CASE("worker pool") {
    set_max_threads(4);
    std::vector<int> hits(100, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 1);
    CHECK(std::count(hits.begin(), hits.end(), 1) == 100);
    CHECK_THROWS_AS(parallel_for(50, [](std::size_t i) { if (i == 17) throw InvalidArgument("boom"); }, 1),
                    InvalidArgument);
    set_max_threads(0);
}

TEST_CASE("partition") {
    const auto sizes = [](const FederatedPartition& p) {
        std::multiset<std::size_t> s;
        for (const auto& shard : p.shards) s.insert(shard.size());
        return s;
    };
    CHECK(sizes(partition_data(9, 3, 1)) == std::multiset<std::size_t>{3, 3, 3});
    CHECK(sizes(partition_data(10, 3, 1)) == std::multiset<std::size_t>{3, 3, 4});
    CHECK(partition_data(50, 4, 9).shards == partition_data(50, 4, 9).shards);

    const auto p = partition_data(100, 3, 2);
    std::set<std::size_t> all;
    for (const auto& shard : p.shards) all.insert(shard.begin(), shard.end());
    CHECK(all.size() == 100);
    CHECK_THROWS_AS(partition_data(2, 3, 0), InvalidArgument);
}

TEST_CASE("snapshot round trip") {
    SUBCASE("empty model") {
        EvolvingModel m(Prototype{Vector::Ones(3), 2.0}, EvolveConfig{});
        const ModelSnapshot back = deserialize(serialize(snapshot_of(m, "a")));
        CHECK(back.clusters.empty());
        CHECK(restore_model(back).empty());
        CHECK(back.D == 3);
    }
    SUBCASE("trained model is byte stable") {
        const std::string bytes = serialize(owner_snapshot(blob_rows(3, kThree), "a"));
        CHECK(serialize(deserialize(bytes)) == bytes);
        const EvolvingModel m = restore_model(deserialize(bytes));
        CHECK(m.total_count() == 300);
    }
    SUBCASE("corrupted fields are rejected") {
        std::string bytes = serialize(owner_snapshot(blob_rows(3, kThree), "a"));
        const auto at = bytes.find("\"n\":");
        REQUIRE(at != std::string::npos);
        std::string bad = bytes;
        bad.replace(at, 4, "\"n\":\"x\",\"m\":");
        CHECK_THROWS_AS(deserialize(bad), SchemaError);
        CHECK_THROWS_AS(deserialize("{}"), SchemaError);
        CHECK_THROWS_AS(deserialize("not json"), SchemaError);
    }
}

TEST_CASE("aggregation") {
    // Merge behaviour in isolation; age pruning is covered separately below.
    ServerOptions server;
    server.age_fraction = 0.0;

    SUBCASE("single owner without overlap is unchanged") {
        EvolvingModel m(Prototype{Vector::Ones(2), 1.0}, EvolveConfig{});
        for (double x : {0.0, 10.0, 20.0}) {
            Cluster c = Cluster::born(0, Vector{{x, 0.0}}, 5);
            c.n = 4;
            c.scatter = 0.5 * Matrix::Identity(2, 2);
            m.add_cluster(c);
        }
        m.set_tick(5);
        const ModelSnapshot a = snapshot_of(m, "a");
        const std::vector<ModelSnapshot> one{a};
        const ModelSnapshot g = aggregate(one, server);
        REQUIRE(g.clusters.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(g.clusters[i].mu == a.clusters[i].mu);
            CHECK(g.clusters[i].scatter == a.clusters[i].scatter);
            CHECK(g.clusters[i].n == a.clusters[i].n);
        }
    }
    SUBCASE("far apart owners never merge across regions") {
        const ModelSnapshot a = owner_snapshot(blob_rows(5, kThree), "a");
        std::vector<Vector> shifted;
        for (const auto& c : kThree) shifted.push_back(c + Vector::Constant(2, 50.0));
        const ModelSnapshot b = owner_snapshot(blob_rows(6, shifted), "b");
        const std::vector<ModelSnapshot> only_a{a}, only_b{b}, both{a, b};
        const auto parts = aggregate(only_a, server).clusters.size() + aggregate(only_b, server).clusters.size();
        CHECK(aggregate(both, server).clusters.size() == parts);
    }
    SUBCASE("duplicate owners collapse") {
        const ModelSnapshot a = owner_snapshot(blob_rows(7, kThree), "a");
        ModelSnapshot b = a;
        b.owner_id = "b";
        const std::vector<ModelSnapshot> both{a, b};
        const ModelSnapshot g = aggregate(both, server);
        CHECK(g.clusters.size() <= a.clusters.size() + 1);
        CHECK(g.total_count() == 2 * a.total_count());
    }
    SUBCASE("aggregation is idempotent") {
        const ModelSnapshot a = owner_snapshot(blob_rows(8, kThree), "a");
        const ModelSnapshot b = owner_snapshot(blob_rows(9, kThree), "b");
        const std::vector<ModelSnapshot> both{a, b};
        const ModelSnapshot g = aggregate(both, server);
        const std::vector<ModelSnapshot> again{g};
        CHECK(serialize(aggregate(again, server)) == serialize(g));
    }
    SUBCASE("mismatched dimension names the offender") {
        const ModelSnapshot a = owner_snapshot(blob_rows(10, kThree), "a");
        const ModelSnapshot b = owner_snapshot(blob_rows(11, kThree), "b");
        const ModelSnapshot c = owner_snapshot(Matrix::Random(20, 3), "c");
        const std::vector<ModelSnapshot> all{a, b, c};
        try {
            (void)aggregate(all, server);
            FAIL("expected a mismatch");
        } catch (const SnapshotMismatch& e) {
            CHECK(e.offending() == std::vector<std::size_t>{2});
        }
    }
}

TEST_CASE("server drops rules idle for most of the stream") {
    EvolvingModel m(Prototype{Vector::Ones(2), 1.0}, EvolveConfig{});
    Cluster stale = Cluster::born(0, Vector{{20.0, 0.0}}, 3);
    m.add_cluster(stale);
    for (int i = 0; i < 100; ++i) process_sample(m, Vector{{0.01 * (i % 5), 0.0}});
    const std::vector<ModelSnapshot> one{snapshot_of(m, "a")};
    REQUIRE(one.front().clusters.size() == 2);
    const ModelSnapshot g = aggregate(one, ServerOptions{});
    REQUIRE(g.clusters.size() == 1);
    CHECK(g.clusters.front().n == 100);

    ServerOptions keep;
    keep.age_fraction = 0.0;
    CHECK(aggregate(one, keep).clusters.size() == 2);
}

TEST_CASE("federated round") {
    const Dataset iris = load_bundled(FEDEVO_DATA_DIR, "iris");

    SUBCASE("deterministic") {
        const auto a = run_round(iris.X, &*iris.y, 3, iris_round(1));
        const auto b = run_round(iris.X, &*iris.y, 3, iris_round(1));
        CHECK(serialize(a.global) == serialize(b.global));
        CHECK(a.owner_bytes == b.owner_bytes);
    }
    SUBCASE("parallel owners do not change the result") {
        RoundOptions serial = iris_round(2);
        serial.parallel_owners = false;
        set_max_threads(4);
        const std::string pooled = serialize(run_round(iris.X, &*iris.y, 3, iris_round(2)).global);
        set_max_threads(0);
        CHECK(pooled == serialize(run_round(iris.X, &*iris.y, 3, serial).global));
    }
    SUBCASE("uploads aggregate to the global model") {
        const auto r = run_round(iris.X, &*iris.y, 3, iris_round(3));
        REQUIRE(r.owner_bytes.size() == 3);
        std::vector<ModelSnapshot> uploads;
        for (const auto& bytes : r.owner_bytes) uploads.push_back(deserialize(bytes));
        CHECK(serialize(aggregate(uploads, iris_round(3).server)) == serialize(r.global));
        std::int64_t uploaded = 0;
        for (const auto& u : uploads) uploaded += u.total_count();
        CHECK(uploaded == 150);
        CHECK(r.global.total_count() <= 150);
    }
    SUBCASE("one owner") {
        RoundOptions ro = iris_round(4);
        ro.n_owners = 1;
        const auto r = run_round(iris.X, &*iris.y, 3, ro);
        const std::vector<ModelSnapshot> one{r.owners.front()};
        CHECK(serialize(aggregate(one, ro.server)) == serialize(r.global));
    }
    SUBCASE("global classifier restores with identical predictions") {
        const auto r = run_round(iris.X, &*iris.y, 3, iris_round(5));
        const std::string bytes = serialize(r.global);
        const ModelSnapshot back = deserialize(bytes);
        CHECK(serialize(back) == bytes);
        const EvolvingClassifier a = restore_classifier(r.global), b = restore_classifier(back);
        const Matrix z = r.round_zero.standardizer.apply(iris.X);
        std::size_t hits = 0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const Vector x = z.row(i).transpose();
            CHECK(a.predict(x) == b.predict(x));
            CHECK(a.predict_log_scores(x) == b.predict_log_scores(x));
            hits += a.predict(x) == (*iris.y)[static_cast<std::size_t>(i)];
        }
        CHECK(hits >= 135);
    }
}
