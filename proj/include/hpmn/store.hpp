#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>

#include "hpmn/data.hpp"
#include "hpmn/hpmn_core.hpp"
#include "hpmn/model.hpp"

namespace hpmn {

/// Query for a user the store has never seen.
class ColdStartError : public std::out_of_range {
 public:
  explicit ColdStartError(const std::string& user)
      : std::out_of_range("no memory for user '" + user + "' (cold start)") {}
};

/// A stored entry that cannot be used with the current model.
class StoreCorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StoreVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct UserState {
  MemoryPool pool;
  std::int64_t last_timestamp = 0;

  bool operator==(const UserState&) const = default;
};

/// Serving-side map from user id to maintained memory. Each ingest advances
/// one user's pool by one step; queries only read.
///
/// Thread safety: queries may run concurrently with each other and with
/// ingests for other users; ingests for the same user are serialized.
class MemoryStore {
 public:
  explicit MemoryStore(std::string model_version = {});
  MemoryStore(MemoryStore&& other) noexcept;
  MemoryStore& operator=(MemoryStore&& other) noexcept;

  const std::string& model_version() const { return model_version_; }
  std::size_t size() const;

  /// Throws std::invalid_argument on timestamp regression and
  /// std::out_of_range for unknown ids; the store is unchanged on error.
  void ingest(const std::string& user, const BehaviorEvent& event, const HpmnModel& model);

  Scored query(const std::string& user, const BehaviorEvent& target, std::span<const std::int32_t> context,
               std::span<const std::int32_t> user_side, const HpmnModel& model) const;

  std::optional<UserState> snapshot(const std::string& user) const;

  /// Appends a zero slot to every pool and re-tags the store.
  void expand(const std::string& new_model_version);

  /// Versioned binary container: header (magic, format, model version, D, p)
  /// followed by one record per user in id order.
  void persist(const std::filesystem::path& path) const;
  static MemoryStore load(const std::filesystem::path& path, const std::string& expected_version);

 private:
  struct Entry {
    mutable std::shared_mutex mutex;
    UserState state;
  };

  Entry* find(const std::string& user) const;
  void check_entry(const std::string& user, const UserState& state, const HpmnModel& model) const;

  std::string model_version_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::unique_ptr<Entry>> entries_;
};

}  // namespace hpmn
