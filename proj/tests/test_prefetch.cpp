#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "fsm_oracle.hpp"
#include "reference_tree.hpp"
#include "ttpsim/prefetch.hpp"
#include "ttpsim/rtunit.hpp"
#include "ttpsim/scene.hpp"

using namespace ttpsim;

namespace {

std::vector<char> letters(const std::string& s) { return {s.begin(), s.end()}; }

StackEvent push_ev(addr_t addr) { return {0, 0, StackEventKind::push, addr}; }
StackEvent pop_ev(addr_t addr) { return {0, 0, StackEventKind::pop, addr}; }

}  // namespace

TEST_CASE("policy names round-trip") {
  for (PrefetchPolicy p :
       {PrefetchPolicy::off, PrefetchPolicy::ttp_dfs, PrefetchPolicy::ttp_bfs,
        PrefetchPolicy::park_leaf, PrefetchPolicy::perfect_upward, PrefetchPolicy::perfect_downward})
    CHECK(prefetch_policy_from_string(to_string(p)) == p);
  CHECK_THROWS_WITH_AS(prefetch_policy_from_string("zap"), "unknown policy 'zap'", ConfigError);
}

TEST_CASE("two-bit machine walks S0 S1 S2 and holds") {
  std::array<int, 3> n{1, 2, 16};
  TtpFsm fsm;
  CHECK(fsm.state == TtpFsm::S0);
  CHECK(fsm.on_pop(n) == 1);
  CHECK(fsm.state == TtpFsm::S1);
  CHECK(fsm.on_pop(n) == 2);
  CHECK(fsm.state == TtpFsm::S2);
  CHECK(fsm.on_pop(n) == 16);
  CHECK(fsm.state == TtpFsm::S2);  // holds on further pops
  CHECK(fsm.on_pop(n) == 16);
  fsm.on_push();
  CHECK(fsm.state == TtpFsm::S0);  // push returns to S0 from any state

  TtpFsm from_s1;
  from_s1.on_pop(n);
  from_s1.on_push();
  CHECK(from_s1.state == TtpFsm::S0);
}

TEST_CASE("first pop after a push emits the new top") {
  DfsPrefetchEngine eng;
  std::deque<addr_t> stack{0xa0};
  CHECK(eng.on_stack_event(push_ev(0xa0), stack).empty());
  stack.push_back(0xb0);
  CHECK(eng.on_stack_event(push_ev(0xb0), stack).empty());
  stack.pop_back();  // pop b, stack [a0]
  CHECK(eng.on_stack_event(pop_ev(0xb0), stack) == std::vector<addr_t>{0xa0});
  // same entry is not emitted again on the next pop
  stack.pop_back();
  CHECK(eng.on_stack_event(pop_ev(0xa0), stack).empty());
}

TEST_CASE("dfs emissions across the reference walk") {
  ReferenceTree t = make_reference_tree();
  std::vector<StackEvent> log;
  RtUnitConfig cfg;
  traverse_ray(t.bvh, t.ray, cfg, &log);

  // expected per-pop emission, derived by hand from the cursor rule with
  // intensity (1, 2, 16)
  std::map<char, std::string> expect{{'A', ""}, {'D', "B"},   {'I', "H"}, {'J', "K"},
                                     {'M', "L"}, {'P', "O"},   {'O', "NL"}, {'N', "KHB"},
                                     {'L', ""}, {'K', ""},    {'H', ""},  {'B', ""},
                                     {'F', "E"}, {'E', ""}};

  DfsPrefetchEngine eng({1, 2, 16});
  std::deque<addr_t> stack;
  for (const StackEvent& ev : log) {
    if (ev.kind == StackEventKind::push)
      stack.push_back(ev.addr);
    else
      stack.pop_back();
    std::vector<addr_t> emitted = eng.on_stack_event(ev, stack);
    if (ev.kind == StackEventKind::push) {
      CHECK(emitted.empty());
      continue;
    }
    CHECK(t.letters_of(emitted) == letters(expect.at(t.letter.at(ev.addr))));
    // emissions always name entries currently on the stack
    for (addr_t a : emitted)
      CHECK(std::find(stack.begin(), stack.end(), a) != stack.end());
  }
}

TEST_CASE("deep-stack budget clamps to un-emitted entries") {
  // push,pop,pop,pop on a 5-deep stack: third pop may emit at most the
  // remaining un-emitted of the top 16, clamped by depth
  DfsPrefetchEngine eng({1, 2, 16});
  std::deque<addr_t> stack;
  for (addr_t a : {0x10, 0x20, 0x30, 0x40, 0x50, 0x60}) {
    stack.push_back(a);
    eng.on_stack_event(push_ev(a), stack);
  }
  stack.pop_back();
  CHECK(eng.on_stack_event(pop_ev(0x60), stack) == std::vector<addr_t>{0x50});
  stack.pop_back();
  CHECK(eng.on_stack_event(pop_ev(0x50), stack) == std::vector<addr_t>{0x40, 0x30});
  stack.pop_back();
  // budget 16, but only 0x20 and 0x10 remain un-emitted
  CHECK(eng.on_stack_event(pop_ev(0x40), stack) == std::vector<addr_t>{0x20, 0x10});
  stack.pop_back();
  CHECK(eng.on_stack_event(pop_ev(0x30), stack).empty());
}

TEST_CASE("cursor engine agrees with the set-based model on random walks") {
  SplitMix64 rng(77);
  for (int run = 0; run < 200; ++run) {
    std::array<int, 3> n{1, 2, 16};
    if (run % 3 == 1) n = {2, 3, 5};
    if (run % 3 == 2) n = {1, 1, 1};
    DfsPrefetchEngine eng(n);
    FsmOracle oracle(n);
    std::deque<addr_t> stack;
    addr_t next_addr = 0x1000;
    for (int step = 0; step < 60; ++step) {
      bool do_push = stack.empty() || (rng.next() & 1);
      if (do_push) {
        addr_t a = next_addr;
        next_addr += 0x20;
        stack.push_back(a);
        oracle.push(a);
        CHECK(eng.on_stack_event(push_ev(a), stack).empty());
      } else {
        addr_t a = stack.back();
        stack.pop_back();
        std::vector<addr_t> want = oracle.pop();
        CHECK(eng.on_stack_event(pop_ev(a), stack) == want);
      }
    }
  }
}

TEST_CASE("bfs engine prefetches from the head and skips emitted entries") {
  BfsPrefetchEngine eng(2);
  // four entries enqueued, then the head is popped with [D, E, F] behind it
  for (int i = 0; i < 4; ++i) eng.on_push();
  std::deque<addr_t> queue{0xd0, 0xe0, 0xf0};
  CHECK(eng.on_queue_pop(queue) == std::vector<addr_t>{0xd0, 0xe0});
  // next pop: D leaves, only F is new inside the distance window
  queue.pop_front();
  CHECK(eng.on_queue_pop(queue) == std::vector<addr_t>{0xf0});
  // then everything in the window has been emitted already
  queue.pop_front();
  CHECK(eng.on_queue_pop(queue).empty());
}

TEST_CASE("bfs engine clamps to queue length") {
  BfsPrefetchEngine eng(4);
  for (int i = 0; i < 3; ++i) eng.on_push();
  std::deque<addr_t> queue{0x20, 0x30};
  CHECK(eng.on_queue_pop(queue).size() == 2);

  BfsPrefetchEngine empty_eng(4);
  empty_eng.on_push();
  CHECK(empty_eng.on_queue_pop({}).empty());
}

TEST_CASE("park-leaf prefetches the stack during the leaf window") {
  ParkLeafPrefetchEngine eng;
  std::deque<addr_t> stack;
  for (addr_t a : {0x10, 0x20, 0x30, 0x40, 0x50}) {
    stack.push_back(a);
    eng.on_push(stack);
  }
  SUBCASE("depth-limited, 8-cycle test window") {
    CHECK(eng.on_leaf_test_start(stack, 8) ==
          std::vector<addr_t>{0x50, 0x40, 0x30, 0x20, 0x10});
    // back-to-back leaf test with no intervening push emits nothing new
    CHECK(eng.on_leaf_test_start(stack, 8).empty());
  }
  SUBCASE("duration-limited window, then resume") {
    CHECK(eng.on_leaf_test_start(stack, 3) == std::vector<addr_t>{0x50, 0x40, 0x30});
    CHECK(eng.on_leaf_test_start(stack, 3) == std::vector<addr_t>{0x20, 0x10});
  }
  SUBCASE("push resets the no-repeat rule") {
    eng.on_leaf_test_start(stack, 8);
    stack.push_back(0x60);
    eng.on_push(stack);
    CHECK(eng.on_leaf_test_start(stack, 2) == std::vector<addr_t>{0x60, 0x50});
  }
  SUBCASE("pops clamp the cursor") {
    stack.pop_back();
    stack.pop_back();
    eng.on_pop(stack);
    CHECK(eng.on_leaf_test_start(stack, 8) == std::vector<addr_t>{0x30, 0x20, 0x10});
  }
  SUBCASE("empty stack emits nothing") {
    CHECK(eng.on_leaf_test_start({}, 8).empty());
  }
}

TEST_CASE("demand-priority arbitration") {
  PrefetchArbiter arb(ArbitrationMode::demand_priority);
  CHECK(arb.pick(true, true, 100) == PrefetchArbiter::Grant::demand);
  CHECK(arb.pick(true, false, 101) == PrefetchArbiter::Grant::demand);
  CHECK(arb.pick(false, true, 102) == PrefetchArbiter::Grant::prefetch);
  CHECK(arb.pick(false, false, 103) == PrefetchArbiter::Grant::none);
  // still demand-first even after a long prefetch drought
  CHECK(arb.pick(true, true, 1000) == PrefetchArbiter::Grant::demand);
}

TEST_CASE("threshold arbitration lets starved prefetches preempt") {
  PrefetchArbiter arb(ArbitrationMode::threshold, 25);
  // 30 cycles since the last prefetch (none ever sent): prefetch wins
  CHECK(arb.pick(true, true, 30) == PrefetchArbiter::Grant::prefetch);
  // only 10 cycles later, demand takes priority again
  CHECK(arb.pick(true, true, 40) == PrefetchArbiter::Grant::demand);
  CHECK(arb.pick(true, true, 54) == PrefetchArbiter::Grant::demand);
  CHECK(arb.pick(true, true, 55) == PrefetchArbiter::Grant::prefetch);
  // demand-idle cycles send prefetches regardless and reset the clock
  CHECK(arb.pick(false, true, 60) == PrefetchArbiter::Grant::prefetch);
  CHECK(arb.pick(true, true, 84) == PrefetchArbiter::Grant::demand);
  CHECK(arb.pick(true, true, 85) == PrefetchArbiter::Grant::prefetch);
}
