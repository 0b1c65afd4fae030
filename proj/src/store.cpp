#include "hpmn/store.hpp"

#include <fstream>
#include <mutex>

#include "hpmn/binary_io.hpp"
#include "hpmn/embedding.hpp"

namespace hpmn {

namespace {

constexpr char kStoreMagic[8] = {'H', 'P', 'M', 'N', 'S', 'T', 'O', 'R'};
constexpr std::uint32_t kStoreFormat = 1;

}  // namespace

MemoryStore::MemoryStore(std::string model_version) : model_version_(std::move(model_version)) {}

MemoryStore::MemoryStore(MemoryStore&& other) noexcept {
  std::unique_lock lock(other.map_mutex_);
  model_version_ = std::move(other.model_version_);
  entries_ = std::move(other.entries_);
}

MemoryStore& MemoryStore::operator=(MemoryStore&& other) noexcept {
  if (this != &other) {
    std::scoped_lock lock(map_mutex_, other.map_mutex_);
    model_version_ = std::move(other.model_version_);
    entries_ = std::move(other.entries_);
  }
  return *this;
}

std::size_t MemoryStore::size() const {
  std::shared_lock lock(map_mutex_);
  return entries_.size();
}

MemoryStore::Entry* MemoryStore::find(const std::string& user) const {
  std::shared_lock lock(map_mutex_);
  const auto it = entries_.find(user);
  return it == entries_.end() ? nullptr : it->second.get();
}

void MemoryStore::check_entry(const std::string& user, const UserState& state, const HpmnModel& model) const {
  const auto& pool = state.pool;
  if (pool.layers() != model.config.schedule.layers() || pool.width() != model.config.memory_dim) {
    throw StoreCorruptionError("memory for user '" + user + "' has shape " + std::to_string(pool.layers()) +
                               "x" + std::to_string(pool.width()) + ", model expects " +
                               std::to_string(model.config.schedule.layers()) + "x" +
                               std::to_string(model.config.memory_dim));
  }
  if (pool.step_counter < 1) {
    throw StoreCorruptionError("memory for user '" + user + "' has no ingested events");
  }
  for (const auto& slot : pool.slots) {
    if (!all_finite(slot)) throw StoreCorruptionError("memory for user '" + user + "' is not finite");
  }
}

void MemoryStore::ingest(const std::string& user, const BehaviorEvent& event, const HpmnModel& model) {
  // Embedding validates ids before anything is touched.
  const Vector embedded = embed_event(event, model.tables);

  Entry* entry = find(user);
  if (!entry) {
    std::unique_lock lock(map_mutex_);
    auto& slot = entries_[user];
    if (!slot) {
      slot = std::make_unique<Entry>();
      slot->state.pool = MemoryPool::zeros(model.config.schedule.layers(), model.config.memory_dim);
      slot->state.last_timestamp = event.timestamp;
    }
    entry = slot.get();
  }

  std::unique_lock lock(entry->mutex);
  auto& state = entry->state;
  if (state.pool.step_counter > 0 && event.timestamp < state.last_timestamp) {
    throw std::invalid_argument("timestamp " + std::to_string(event.timestamp) + " for user '" + user +
                                "' precedes last ingested " + std::to_string(state.last_timestamp));
  }
  MemoryPool next = step(state.pool, model.core, model.config.schedule, embedded);
  state.pool = std::move(next);
  state.last_timestamp = event.timestamp;
}

Scored MemoryStore::query(const std::string& user, const BehaviorEvent& target,
                          std::span<const std::int32_t> context, std::span<const std::int32_t> user_side,
                          const HpmnModel& model) const {
  const Entry* entry = find(user);
  if (!entry) throw ColdStartError(user);
  std::shared_lock lock(entry->mutex);
  if (entry->state.pool.step_counter == 0) throw ColdStartError(user);
  check_entry(user, entry->state, model);
  return model.score_pool(entry->state.pool, target, context, user_side);
}

std::optional<UserState> MemoryStore::snapshot(const std::string& user) const {
  const Entry* entry = find(user);
  if (!entry) return std::nullopt;
  std::shared_lock lock(entry->mutex);
  return entry->state;
}

void MemoryStore::expand(const std::string& new_model_version) {
  std::unique_lock lock(map_mutex_);
  for (auto& [_, entry] : entries_) {
    std::unique_lock entry_lock(entry->mutex);
    expand_pool(entry->state.pool);
  }
  model_version_ = new_model_version;
}

void MemoryStore::persist(const std::filesystem::path& path) const {
  std::shared_lock lock(map_mutex_);
  std::size_t layers = 0;
  std::size_t width = 0;
  if (!entries_.empty()) {
    layers = entries_.begin()->second->state.pool.layers();
    width = entries_.begin()->second->state.pool.width();
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write store file " + path.string());
  out.write(kStoreMagic, sizeof(kStoreMagic));
  io::put<std::uint32_t>(out, kStoreFormat);
  io::put_string(out, model_version_);
  io::put<std::uint64_t>(out, layers);
  io::put<std::uint64_t>(out, width);
  io::put<std::uint64_t>(out, entries_.size());
  for (const auto& [user, entry] : entries_) {
    std::shared_lock entry_lock(entry->mutex);
    const auto& st = entry->state;
    if (st.pool.layers() != layers || st.pool.width() != width) {
      throw StoreCorruptionError("user '" + user + "' has a pool shape different from the store");
    }
    io::put_string(out, user);
    io::put<std::int64_t>(out, st.last_timestamp);
    io::put<std::int64_t>(out, st.pool.step_counter);
    for (const auto& slot : st.pool.slots) io::put_doubles(out, slot);
  }
  if (!out) throw std::runtime_error("failed writing store file " + path.string());
}

MemoryStore MemoryStore::load(const std::filesystem::path& path, const std::string& expected_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open store file " + path.string());
  char magic[sizeof(kStoreMagic)];
  if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kStoreMagic)) {
    throw std::runtime_error(path.string() + " is not a memory store file");
  }
  const auto format = io::get<std::uint32_t>(in);
  if (format != kStoreFormat) throw std::runtime_error("unsupported store format " + std::to_string(format));
  MemoryStore store(io::get_string(in));
  if (store.model_version_ != expected_version) {
    throw StoreVersionError("store was built with model " + store.model_version_ + ", loaded model is " +
                            expected_version);
  }
  const auto layers = io::get<std::uint64_t>(in);
  const auto width = io::get<std::uint64_t>(in);
  const auto count = io::get<std::uint64_t>(in);
  for (std::uint64_t n = 0; n < count; ++n) {
    auto entry = std::make_unique<Entry>();
    const std::string user = io::get_string(in);
    entry->state.last_timestamp = io::get<std::int64_t>(in);
    entry->state.pool.step_counter = io::get<std::int64_t>(in);
    entry->state.pool.slots.assign(layers, Vector(width));
    for (auto& slot : entry->state.pool.slots) io::get_doubles(in, slot);
    store.entries_.emplace(user, std::move(entry));
  }
  return store;
}

}  // namespace hpmn
