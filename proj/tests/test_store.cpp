#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "hpmn/store.hpp"
#include "test_util.hpp"

namespace hpmn {
namespace {

SyntheticConfig data_config(std::uint64_t seed, std::size_t users) {
  SyntheticConfig d;
  d.n_users = users;
  d.seq_len = 20;
  d.n_items = 30;
  d.n_categories = 6;
  d.seed = seed;
  return d;
}

HpmnModel small_model(const SyntheticConfig& d, std::uint64_t seed) {
  ModelConfig c;
  c.vocab = synthetic_vocab(d);
  c.embed_dim = 4;
  c.memory_dim = 5;
  c.energy_hidden = 6;
  c.mlp_hidden = {8, 4};
  return HpmnModel::create(c, seed);
}

void ingest_history(MemoryStore& store, const Sample& s, const HpmnModel& m) {
  for (const auto& e : s.sequence.events) store.ingest(s.sequence.user_id, e, m);
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(MemoryStore, FirstIngestCreatesPool) {
  const auto d = data_config(1, 1);
  const HpmnModel m = small_model(d, 1);
  MemoryStore store("v1");
  const auto s = generate_synthetic(d).front();
  EXPECT_FALSE(store.snapshot("alice"));
  store.ingest("alice", s.sequence.events[0], m);
  const auto st = store.snapshot("alice");
  ASSERT_TRUE(st);
  EXPECT_EQ(st->pool.step_counter, 1);
  EXPECT_EQ(st->pool.layers(), 3u);
  EXPECT_EQ(st->pool.width(), 5u);
  EXPECT_EQ(st->last_timestamp, s.sequence.events[0].timestamp);
  EXPECT_EQ(store.size(), 1u);
}

TEST(MemoryStore, CounterTracksIngestedEvents) {
  const auto d = data_config(2, 1);
  const HpmnModel m = small_model(d, 2);
  MemoryStore store;
  const auto s = generate_synthetic(d).front();
  for (std::size_t i = 0; i < s.sequence.events.size(); ++i) {
    store.ingest("u", s.sequence.events[i], m);
    EXPECT_EQ(store.snapshot("u")->pool.step_counter, static_cast<std::int64_t>(i + 1));
  }
}

TEST(MemoryStore, TimestampRegressionLeavesStoreUnchanged) {
  const auto d = data_config(3, 1);
  const HpmnModel m = small_model(d, 3);
  MemoryStore store;
  BehaviorEvent e{1, 1, 100, {1}};
  store.ingest("u", e, m);
  e.timestamp = 100;
  store.ingest("u", e, m);
  const UserState before = *store.snapshot("u");
  e.timestamp = 99;
  EXPECT_THROW(store.ingest("u", e, m), std::invalid_argument);
  EXPECT_EQ(*store.snapshot("u"), before);
}

TEST(MemoryStore, UnknownIdRejectedBeforeMutation) {
  const auto d = data_config(4, 1);
  const HpmnModel m = small_model(d, 4);
  MemoryStore store;
  EXPECT_THROW(store.ingest("u", BehaviorEvent{9999, 0, 1, {1}}, m), std::out_of_range);
  EXPECT_EQ(store.size(), 0u);
  store.ingest("u", BehaviorEvent{1, 1, 1, {1}}, m);
  const UserState before = *store.snapshot("u");
  EXPECT_THROW(store.ingest("u", BehaviorEvent{1, 99, 2, {1}}, m), std::out_of_range);
  EXPECT_EQ(*store.snapshot("u"), before);
}

TEST(MemoryStore, ColdStartIsDistinctError) {
  const auto d = data_config(5, 1);
  const HpmnModel m = small_model(d, 5);
  const MemoryStore store;
  const std::vector<std::int32_t> ctx{1}, us{1};
  EXPECT_THROW(store.query("nobody", BehaviorEvent{1, 1, 0, {1}}, ctx, us, m), ColdStartError);
}

TEST(MemoryStore, ShapeMismatchIsCorruption) {
  const auto d = data_config(6, 1);
  const HpmnModel m = small_model(d, 6);
  HpmnModel bigger = m;
  bigger.expand(8, 1);
  MemoryStore store;
  store.ingest("u", BehaviorEvent{1, 1, 1, {1}}, m);
  const std::vector<std::int32_t> ctx{1}, us{1};
  EXPECT_THROW(store.query("u", BehaviorEvent{1, 1, 2, {1}}, ctx, us, bigger), StoreCorruptionError);
}

TEST(MemoryStore, QueryIsReadOnlyAndRepeatable) {
  const auto d = data_config(7, 1);
  const HpmnModel m = small_model(d, 7);
  const auto s = generate_synthetic(d).front();
  MemoryStore store;
  ingest_history(store, s, m);
  const UserState before = *store.snapshot(s.sequence.user_id);
  const Scored a = store.query(s.sequence.user_id, s.target, s.context, s.sequence.user_side, m);
  const Scored b = store.query(s.sequence.user_id, s.target, s.context, s.sequence.user_side, m);
  EXPECT_EQ(a.probability, b.probability);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(*store.snapshot(s.sequence.user_id), before);
  EXPECT_GT(a.probability, 0.0);
  EXPECT_LT(a.probability, 1.0);
  double sum = 0.0;
  for (double w : a.weights) sum += w;
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(MemoryStore, StreamEqualsOfflineBitwise) {
  const auto d = data_config(8, 100);
  const HpmnModel m = small_model(d, 8);
  const auto samples = generate_synthetic(d);
  MemoryStore store("v");
  for (const auto& s : samples) ingest_history(store, s, m);
  EXPECT_EQ(store.size(), 100u);
  for (const auto& s : samples) {
    const auto st = store.snapshot(s.sequence.user_id);
    ASSERT_TRUE(st);
    const MemoryPool offline = run_sequence(m.core, m.config.schedule, m.embed_history(s.sequence));
    EXPECT_EQ(st->pool, offline);
    const Scored online = store.query(s.sequence.user_id, s.target, s.context, s.sequence.user_side, m);
    const Scored batch = m.score(s);
    EXPECT_EQ(online.probability, batch.probability);
    EXPECT_EQ(online.weights, batch.weights);
  }
}

TEST(MemoryStore, IngestTouchesOnlyOneUser) {
  const auto d = data_config(9, 3);
  const HpmnModel m = small_model(d, 9);
  const auto samples = generate_synthetic(d);
  MemoryStore store;
  for (const auto& s : samples) ingest_history(store, s, m);
  const UserState other = *store.snapshot(samples[1].sequence.user_id);
  BehaviorEvent e = samples[0].sequence.events.back();
  e.timestamp += 1;
  store.ingest(samples[0].sequence.user_id, e, m);
  EXPECT_EQ(*store.snapshot(samples[1].sequence.user_id), other);
}

TEST(MemoryStore, StateSizeIndependentOfHistoryLength) {
  auto d = data_config(10, 1);
  d.seq_len = 400;
  const HpmnModel m = small_model(d, 10);
  MemoryStore store;
  ingest_history(store, generate_synthetic(d).front(), m);
  const auto st = store.snapshot("u000000");
  ASSERT_TRUE(st);
  EXPECT_EQ(st->pool.slots.size(), 3u);
  for (const auto& slot : st->pool.slots) EXPECT_EQ(slot.size(), 5u);
}

TEST(StoreFile, EmptyRoundTrip) {
  test::TempDir dir("store");
  MemoryStore("abc").persist(dir / "s.bin");
  const MemoryStore back = MemoryStore::load(dir / "s.bin", "abc");
  EXPECT_EQ(back.size(), 0u);
  EXPECT_EQ(back.model_version(), "abc");
}

TEST(StoreFile, HundredUsersRoundTripBitwise) {
  test::TempDir dir("store");
  const auto d = data_config(11, 100);
  const HpmnModel m = small_model(d, 11);
  const auto samples = generate_synthetic(d);
  MemoryStore store(m.fingerprint());
  for (const auto& s : samples) ingest_history(store, s, m);
  store.persist(dir / "a.bin");
  const MemoryStore back = MemoryStore::load(dir / "a.bin", m.fingerprint());
  ASSERT_EQ(back.size(), 100u);
  for (const auto& s : samples) {
    const auto a = store.snapshot(s.sequence.user_id);
    const auto b = back.snapshot(s.sequence.user_id);
    ASSERT_TRUE(b);
    EXPECT_EQ(a->last_timestamp, b->last_timestamp);
    EXPECT_EQ(a->pool.step_counter, b->pool.step_counter);
    for (std::size_t j = 0; j < a->pool.slots.size(); ++j) {
      EXPECT_EQ(std::memcmp(a->pool.slots[j].data(), b->pool.slots[j].data(), 5 * sizeof(double)), 0);
    }
  }
  back.persist(dir / "b.bin");
  EXPECT_EQ(file_bytes(dir / "a.bin"), file_bytes(dir / "b.bin"));
}

TEST(StoreFile, WrongVersionRefused) {
  test::TempDir dir("store");
  MemoryStore("model-a").persist(dir / "s.bin");
  EXPECT_THROW(MemoryStore::load(dir / "s.bin", "model-b"), StoreVersionError);
}

TEST(StoreFile, ForeignOrTruncatedFileRefused) {
  test::TempDir dir("store");
  EXPECT_THROW(MemoryStore::load(dir / "none.bin", "v"), std::runtime_error);
  {
    std::ofstream(dir / "junk.bin") << "garbage";
  }
  EXPECT_THROW(MemoryStore::load(dir / "junk.bin", "v"), std::runtime_error);
  const auto d = data_config(12, 5);
  const HpmnModel m = small_model(d, 12);
  MemoryStore store("v");
  for (const auto& s : generate_synthetic(d)) ingest_history(store, s, m);
  store.persist(dir / "s.bin");
  std::filesystem::resize_file(dir / "s.bin", std::filesystem::file_size(dir / "s.bin") - 3);
  EXPECT_THROW(MemoryStore::load(dir / "s.bin", "v"), std::runtime_error);
}

TEST(MemoryStore, ExpandAppendsZeroSlot) {
  const auto d = data_config(13, 4);
  HpmnModel m = small_model(d, 13);
  const auto samples = generate_synthetic(d);
  MemoryStore store("v1");
  for (const auto& s : samples) ingest_history(store, s, m);
  const UserState before = *store.snapshot(samples[0].sequence.user_id);
  store.expand("v2");
  m.expand(64, 1);
  EXPECT_EQ(store.model_version(), "v2");
  const UserState after = *store.snapshot(samples[0].sequence.user_id);
  ASSERT_EQ(after.pool.layers(), 4u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(after.pool.slots[j], before.pool.slots[j]);
  EXPECT_EQ(after.pool.slots[3], Vector(5, 0.0));
  EXPECT_EQ(after.pool.step_counter, before.pool.step_counter);
  const auto& s = samples[0];
  EXPECT_NO_THROW(store.query(s.sequence.user_id, s.target, s.context, s.sequence.user_side, m));
}

TEST(MemoryStore, ConcurrentIngestAndQuery) {
  const auto d = data_config(14, 16);
  const HpmnModel m = small_model(d, 14);
  const auto samples = generate_synthetic(d);
  MemoryStore store;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < 4; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t u = w; u < samples.size(); u += 4) {
        const auto& s = samples[u];
        ingest_history(store, s, m);
        store.query(s.sequence.user_id, s.target, s.context, s.sequence.user_side, m);
      }
    });
  }
  for (auto& t : workers) t.join();
  ASSERT_EQ(store.size(), samples.size());
  for (const auto& s : samples) {
    EXPECT_EQ(store.snapshot(s.sequence.user_id)->pool, m.encode(s.sequence));
  }
}

TEST(MemoryStore, SameUserIngestsSerialize) {
  const auto d = data_config(15, 1);
  const HpmnModel m = small_model(d, 15);
  MemoryStore store;
  const BehaviorEvent e{2, 2, 5, {1}};
  std::vector<std::thread> workers;
  for (int w = 0; w < 4; ++w) {
    workers.emplace_back([&] {
      for (int k = 0; k < 25; ++k) store.ingest("shared", e, m);
    });
  }
  for (auto& t : workers) t.join();
  const auto st = store.snapshot("shared");
  EXPECT_EQ(st->pool.step_counter, 100);
  const MemoryPool expected = run_sequence(m.core, m.config.schedule,
                                           std::vector<Vector>(100, embed_event(e, m.tables)));
  EXPECT_EQ(st->pool, expected);
}

}  // namespace
}  // namespace hpmn
