#include "repcap/bounds.hpp"
#include "repcap/engine.hpp"
#include "repcap/error.hpp"
#include "repcap/mdp.hpp"

#include <doctest.h>

#include <cmath>
#include <fmt/format.h>

using namespace repcap;
using SD = ServiceDistribution;

namespace {

std::vector<SD> bimodal_pair(double p = 0.1) {
    return {SD::deterministic(2.0), SD::finite({{1.0, 1.0 - p}, {20.0, p}})};
}

double gain_of(const TransitionKernel& kr, std::span<const SD> ds, Time delta, const std::string& policy) {
    const auto pol = parse_policy(policy, static_cast<int>(ds.size()));
    return evaluate_policy(kr, policy_actions(kr, ds, delta, *pol));
}

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error thrown");
    return ErrorKind::ConfigError;
}

}  // namespace

TEST_SUITE("mdp") {

TEST_CASE("lattice unit") {
    const std::vector<SD> a{SD::finite({{0.5, 0.5}, {1.5, 0.5}}), SD::deterministic(1.0)};
    CHECK(lattice_unit(a) == doctest::Approx(0.5));
    const std::vector<SD> b{SD::finite({{0.3, 0.5}, {0.7, 0.5}}), SD::deterministic(2.0)};
    CHECK(lattice_unit(b) == doctest::Approx(0.1));
    CHECK(lattice_unit(bimodal_pair()) == 1.0);
}

TEST_CASE("kernel rows are probability vectors") {
    for (double delta : {0.0, 1.0}) {
        const auto ds = bimodal_pair();
        const auto kr = build_mdp(ds, delta);
        CHECK(kr.size() > 10);
        CHECK(kr.key(kr.initial) == "B=;t=(0 0);c=(0 0);D=0");
        for (std::size_t s = 0; s < kr.size(); ++s) {
            REQUIRE_FALSE(kr.actions[s].empty());
            const auto& st = kr.states[s];
            if (st.pending > 0 || st.first_idle() < 0) CHECK(kr.actions[s].size() == 1);
            else CHECK(kr.actions[s].size() == static_cast<std::size_t>(st.num_jobs()) + 1);
            for (const auto& a : kr.actions[s]) {
                double total = 0.0;
                for (const auto& o : a.outcomes) {
                    CHECK(o.prob > 0.0);
                    CHECK(o.next < kr.size());
                    total += o.prob;
                }
                CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("replicating from all-idle costs twice the expected minimum") {
    // new on server 1, copy on server 2, then wait for the job to leave.
    const auto ds = bimodal_pair();
    const auto kr = build_mdp(ds, 0.0);
    auto step = [&](std::uint32_t s, MdpAction::Kind kind) {
        for (const auto& a : kr.actions[s])
            if (a.kind == kind) return a.outcomes.front().next;
        FAIL("missing action");
        return s;
    };
    std::uint32_t s = step(kr.initial, MdpAction::Kind::New);
    s = step(s, MdpAction::Kind::Rep);
    CHECK(kr.key(s) == "B={1 2};t=(0 0);c=(0 0);D=0");
    // Expected server-time until the job departs, by walking the chain.
    double cost = 0.0, mass = 1.0;
    for (int guard = 0; guard < 10 && mass > 0.0; ++guard) {
        const auto& a = kr.actions[s].front();
        std::uint32_t cont = s;
        double stay = 0.0;
        for (const auto& o : a.outcomes) {
            cost += mass * o.prob * o.cost;
            if (o.departures == 0.0) {
                cont = o.next;
                stay = o.prob;
            }
        }
        mass *= stay;
        s = cont;
    }
    CHECK(cost == doctest::Approx(2.2).epsilon(1e-12));
    CHECK(gain_of(kr, ds, 0.0, "fullrep") == doctest::Approx(2.2).epsilon(1e-9));
}

TEST_CASE("one server gives one over the mean") {
    const std::vector<SD> ds{SD::finite({{1.0, 0.25}, {2.0, 0.5}, {5.0, 0.25}})};
    const auto kr = build_mdp(ds, 0.0);
    const auto sol = solve_average_cost(kr);
    CHECK(sol.throughput == doctest::Approx(1.0 / 2.5).epsilon(1e-9));
}

TEST_CASE("deterministic pair") {
    for (double delta : {0.0, 1.5, 3.0}) {
        const std::vector<SD> ds{SD::deterministic(1.5), SD::deterministic(1.5)};
        const auto kr = build_mdp(ds, delta);
        const auto sol = solve_average_cost(kr);
        CHECK(sol.throughput == doctest::Approx(2.0 / 1.5).epsilon(1e-9));
        // The optimum never replicates.
        for (std::uint32_t s = 0; s < kr.size(); ++s)
            CHECK(kr.actions[s][static_cast<std::size_t>(sol.policy[s])].kind != MdpAction::Kind::Rep);
        CHECK(sol.gain == doctest::Approx(gain_of(kr, ds, delta, "norep")).epsilon(1e-12));
    }
}

TEST_CASE("known policies match their closed forms") {
    const auto ds = bimodal_pair();
    const auto kr = build_mdp(ds, 0.0);
    CHECK(2.0 / gain_of(kr, ds, 0.0, "norep") == doctest::Approx(0.5 + 1.0 / 2.9).epsilon(1e-9));
    CHECK(2.0 / gain_of(kr, ds, 0.0, "fullrep") == doctest::Approx(1.0 / 1.1).epsilon(1e-9));
    CHECK(2.0 / gain_of(kr, ds, 0.0, "adarep:{1->2:inf,2->1:inf}") ==
          doctest::Approx(0.5 + 1.0 / 2.9).epsilon(1e-9));

    const auto kd = build_mdp(ds, 1.0);
    CHECK(2.0 / gain_of(kd, ds, 1.0, "fullrep") == doctest::Approx(1.0 / 2.1).epsilon(1e-9));
}

TEST_CASE("bimodal pair optimum sits between AdaRep and the pause bound") {
    const auto ds = bimodal_pair();
    const auto kr = build_mdp(ds, 0.0);
    const auto sol = solve_average_cost(kr);
    const double pause = optimize_pause_bound(ds, 0.0).bound;
    CHECK(pause == doctest::Approx(1.25).epsilon(1e-9));
    CHECK(sol.throughput <= pause + 1e-9);
    const double ada = 2.0 / gain_of(kr, ds, 0.0, "adarep:{1->2:inf,2->1:1}");
    CHECK(ada == doctest::Approx(1.2185).epsilon(5e-4));
    CHECK(sol.throughput >= ada - 1e-9);

    // Every lattice threshold pair, NoRep and FullRep included as corners.
    std::vector<std::string> t1{"0", "1", "inf"}, t2{"inf"};
    for (int t = 0; t <= 20; ++t) t2.push_back(std::to_string(t));
    for (const auto& a : t1)
        for (const auto& b : t2) {
            const auto spec = fmt::format("adarep:{{1->2:{},2->1:{}}}", a, b);
            CHECK_MESSAGE(sol.gain <= gain_of(kr, ds, 0.0, spec) + 1e-9, spec);
        }
}

TEST_CASE("simulating the optimal table reproduces its gain") {
    const auto ds = bimodal_pair();
    const auto kr = build_mdp(ds, 0.0);
    const auto sol = solve_average_cost(kr);
    const auto csv = policy_to_csv(kr, sol.policy);
    CHECK(csv.starts_with("# unit=1\nstate,action\n"));
    auto table = std::make_shared<TabularPolicy>(TabularPolicy::from_csv(csv, 2));
    const auto run = run_saturated({ds, 0.0}, table, 400000, 21);
    CHECK(std::abs(run.throughput - sol.throughput) <= 3.0 * run.throughput_stderr);
    CHECK(std::abs(run.mean_computing_time - sol.gain) <= 3.0 * run.computing_time_stderr);
}

TEST_CASE("simulating with cancellation and three servers") {
    const std::vector<SD> ds{SD::finite({{1.0, 0.8}, {6.0, 0.2}}), SD::finite({{1.0, 0.6}, {3.0, 0.4}}),
                             SD::deterministic(2.0)};
    const Time delta = 1.0;
    const auto kr = build_mdp(ds, delta);
    const auto sol = solve_average_cost(kr);
    CHECK(sol.gain <= gain_of(kr, ds, delta, "norep") + 1e-9);
    CHECK(sol.gain <= gain_of(kr, ds, delta, "fullrep") + 1e-9);
    auto table = std::make_shared<TabularPolicy>(TabularPolicy::from_csv(policy_to_csv(kr, sol.policy), 3));
    const auto run = run_saturated({ds, delta}, table, 300000, 5);
    CHECK(std::abs(run.throughput - sol.throughput) <= 3.0 * run.throughput_stderr);
}

TEST_CASE("rejected inputs") {
    const std::vector<SD> cont{SD::exponential(1.0), SD::deterministic(1.0)};
    CHECK(kind_of([&] { build_mdp(cont, 0.0); }) == ErrorKind::InvalidDistribution);
    const auto ds = bimodal_pair();
    CHECK(kind_of([&] { build_mdp(ds, 0.5); }) == ErrorKind::NonLatticeDelta);
    const std::vector<SD> irr{SD::deterministic(1.0), SD::deterministic(std::sqrt(2.0))};
    CHECK(kind_of([&] { build_mdp(irr, 0.0); }) == ErrorKind::IncommensurateSupport);
    CHECK(kind_of([&] { build_mdp(ds, 0.0, 10); }) == ErrorKind::StateExplosion);
    CHECK(kind_of([&] { TabularPolicy::from_csv("state,action\n", 2); }) == ErrorKind::ConfigError);
}

}
