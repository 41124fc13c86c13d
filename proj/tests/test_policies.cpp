#include "repcap/error.hpp"
#include "repcap/policies.hpp"

#include <doctest.h>

using namespace repcap;
using SD = ServiceDistribution;

namespace {

const std::vector<SD>& bimodal_pair() {
    static const std::vector<SD> v{SD::deterministic(2.0), SD::finite({{1.0, 0.9}, {20.0, 0.1}})};
    return v;
}

Observation one_idle(const std::vector<SD>& laws, int idle, std::vector<JobView> jobs, Time delta = 0.0) {
    Observation o;
    o.idle_server = idle;
    o.idle_servers = {idle};
    o.jobs = std::move(jobs);
    o.laws = laws;
    o.delta = delta;
    o.cancel_remaining.assign(laws.size(), 0.0);
    o.validate();
    return o;
}

}  // namespace

TEST_SUITE("policies") {

TEST_CASE("AdaRep threshold decisions") {
    const auto ada = parse_policy("adarep:{1->2:inf, 2->1:1.0}", 2);
    auto late = one_idle(bimodal_pair(), 0, {{7, {1}, {2.0}}});
    CHECK(ada->decide(late) == Decision::replicate(7));
    auto early = one_idle(bimodal_pair(), 0, {{7, {1}, {0.5}}});
    CHECK(ada->decide(early) == Decision::fresh({0}));
    // Closed boundary.
    auto exact = one_idle(bimodal_pair(), 0, {{7, {1}, {1.0}}});
    CHECK(ada->decide(exact) == Decision::replicate(7));
    // Never 1 -> 2.
    auto other = one_idle(bimodal_pair(), 1, {{3, {0}, {1.9}}});
    CHECK(ada->decide(other) == Decision::fresh({1}));
}

TEST_CASE("homogeneous AdaRep counts additional copies") {
    const std::vector<SD> laws(10, SD::shifted_exponential(0.5, 1.0));
    const auto ada = parse_policy("adarep-hom:[0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9]", 10);
    auto obs = one_idle(laws, 9, {{1, {0, 1, 2}, {0.35, 0.2, 0.05}}});
    CHECK(ada->decide(obs) == Decision::replicate(1));
    obs.jobs[0].elapsed[0] = 0.29;
    CHECK(ada->decide(obs) == Decision::fresh({9}));
}

TEST_CASE("AdaRep prefers the oldest job, then the smallest id") {
    const std::vector<SD> laws(4, SD::exponential(1.0));
    const auto ada = parse_policy("adarep-hom:[0,0,0]", 4);
    auto obs = one_idle(laws, 3, {{5, {0}, {1.0}}, {2, {1}, {1.0}}, {9, {2}, {0.4}}});
    CHECK(ada->decide(obs) == Decision::replicate(2));
    obs.jobs[2].elapsed[0] = 3.0;
    CHECK(ada->decide(obs) == Decision::replicate(9));
}

TEST_CASE("AdaRep history table with fallback") {
    const std::vector<SD> laws(3, SD::exponential(1.0));
    const auto ada = parse_policy("adarep:{1->2:0.5, 1,2->3:2, 1->3:0.1}", 3);
    // Full history key beats the origin pair.
    auto obs = one_idle(laws, 2, {{1, {0, 1}, {1.0, 0.5}}});
    CHECK(ada->decide(obs) == Decision::fresh({2}));
    obs.jobs[0].elapsed[0] = 2.0;
    CHECK(ada->decide(obs) == Decision::replicate(1));
    // Single-copy job uses the origin pair.
    auto single = one_idle(laws, 2, {{4, {0}, {0.2}}});
    CHECK(ada->decide(single) == Decision::replicate(4));
    // Missing key means never.
    auto from2 = one_idle(laws, 2, {{4, {1}, {100.0}}});
    CHECK(ada->decide(from2) == Decision::fresh({2}));
}

TEST_CASE("instantaneous rate examples") {
    // Fresh job on server 1, server 2 idle.
    auto obs = one_idle(bimodal_pair(), 1, {{1, {0}, {0.0}}});
    const double rep = instantaneous_rate(obs, Decision::replicate(1));
    const double fresh = instantaneous_rate(obs, Decision::fresh({1}));
    CHECK(rep == doctest::Approx(1.0 / 1.1).epsilon(1e-12));
    CHECK(fresh == doctest::Approx(0.5 + 1.0 / 2.9).epsilon(1e-12));
    CHECK(MaxRate().decide(obs) == Decision::replicate(1));

    // Server 1 idle, server-2 job at elapsed 1: residual is the atom 19.
    auto late = one_idle(bimodal_pair(), 0, {{1, {1}, {1.0}}});
    CHECK(instantaneous_rate(late, Decision::replicate(1)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(instantaneous_rate(late, Decision::fresh({0})) == doctest::Approx(0.5 + 1.0 / 19.0).epsilon(1e-12));
    CHECK(MaxRate().decide(late) == Decision::fresh({0}));

    // Memoryless tie goes to new.
    const std::vector<SD> exps(2, SD::exponential(1.0));
    for (double e : {0.0, 0.3, 2.0}) {
        auto o = one_idle(exps, 0, {{1, {1}, {e}}});
        CHECK(instantaneous_rate(o, Decision::replicate(1)) == doctest::Approx(2.0));
        CHECK(instantaneous_rate(o, Decision::fresh({0})) == doctest::Approx(2.0));
        CHECK(MaxRate().decide(o) == Decision::fresh({0}));
    }
}

TEST_CASE("MaxRate cancellation switch") {
    const std::vector<SD> hx(2, SD::hyper_exp(1.0, 0.05, 0.3));
    auto obs = one_idle(hx, 0, {{1, {1}, {0.0}}}, 1.0);
    const double inc = instantaneous_rate(obs, Decision::replicate(1), MaxRateDelta::Include);
    const double exc = instantaneous_rate(obs, Decision::replicate(1), MaxRateDelta::Exclude);
    CHECK(inc < exc);
    CHECK(1.0 / inc == doctest::Approx(1.0 / exc + 1.0));
    CHECK(parse_policy("maxrate:exclude-delta", 2)->spec() == "maxrate:exclude-delta");
}

TEST_CASE("empty queue behaviour") {
    auto obs = one_idle(bimodal_pair(), 1, {{1, {0}, {0.4}}});
    obs.queue_nonempty = false;
    CHECK(NoRep().decide(obs) == Decision::wait());
    CHECK(parse_policy("adarep:{1->2:inf,2->1:1}", 2)->decide(obs) == Decision::replicate(1));
    CHECK(MaxRate().decide(obs) == Decision::replicate(1));
    auto none = one_idle(bimodal_pair(), 1, {});
    none.queue_nonempty = false;
    CHECK(MaxRate().decide(none) == Decision::wait());
    CHECK(FullRep().decide(none) == Decision::wait());
}

TEST_CASE("group policies wait for their group") {
    const std::vector<SD> laws(3, SD::exponential(1.0));
    Observation obs;
    obs.laws = laws;
    obs.idle_server = 0;
    obs.idle_servers = {0, 1};
    obs.jobs = {{1, {2}, {0.1}}};
    obs.validate();
    CHECK(FullRep().decide(obs) == Decision::wait());
    const auto up = parse_policy("upfront:[[1,2],[3]]", 3);
    CHECK(up->decide(obs) == Decision::fresh({0, 1}));
    obs.idle_servers = {0, 1, 2};
    obs.jobs.clear();
    CHECK(FullRep().decide(obs) == Decision::fresh({0, 1, 2}));
}

TEST_CASE("decide is pure") {
    const auto pols = {parse_policy("norep", 2), parse_policy("fullrep", 2), parse_policy("maxrate", 2),
                       parse_policy("adarep:{2->1:1}", 2), parse_policy("upfront:[[1,2]]", 2)};
    auto obs = one_idle(bimodal_pair(), 0, {{3, {1}, {1.5}}});
    for (const auto& p : pols) {
        const auto first = p->decide(obs);
        for (int i = 0; i < 5; ++i) CHECK(p->decide(obs) == first);
    }
}

TEST_CASE("inconsistent observations are rejected") {
    Observation obs;
    obs.laws = bimodal_pair();
    obs.idle_server = 0;
    obs.idle_servers = {0};
    obs.jobs = {{1, {0}, {0.5}}};
    CHECK_THROWS_AS(obs.validate(), Error);
    obs.jobs = {{1, {1}, {-0.5}}};
    CHECK_THROWS_AS(obs.validate(), Error);
    obs.jobs = {{1, {1}, {}}};
    CHECK_THROWS_AS(obs.validate(), Error);
}

TEST_CASE("policy spec strings") {
    for (const char* s : {"norep", "fullrep", "maxrate", "upfront:[[1,3],[2]]", "adarep:{1->2:inf, 2->1:1}",
                          "adarep-hom:[0.1,0.2]", "adarep:{1,2->3:0.5}"})
        CHECK(parse_policy(parse_policy(s, 3)->spec(), 3)->spec() == parse_policy(s, 3)->spec());
    CHECK(parse_policy("adarep:{1->2:inf, 2->1:1.0}", 2)->spec() == "adarep:{1->2:inf, 2->1:1}");
    CHECK_THROWS_AS(parse_policy("upfront:[[1],[1,2]]", 2), Error);
    CHECK_THROWS_AS(parse_policy("adarep:{1->1:0}", 2), Error);
    CHECK_THROWS_AS(parse_policy("adarep:{1->3:0}", 2), Error);
    CHECK_THROWS_AS(parse_policy("adarep-hom:[0.5,0.1]", 3), Error);
    CHECK_THROWS_AS(parse_policy("random", 2), Error);
    CHECK_THROWS_AS(parse_policy("norep extra", 2), Error);
}

}
