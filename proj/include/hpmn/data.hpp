#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace hpmn {

/// Raised on malformed input files. Carries the 1-based line number when known.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct BehaviorEvent {
  std::int32_t item_id = 0;
  std::int32_t category_id = 0;
  std::int64_t timestamp = 0;
  std::vector<std::int32_t> side_features;

  bool operator==(const BehaviorEvent&) const = default;
};

struct UserSequence {
  std::string user_id;
  std::vector<std::int32_t> user_side;
  std::vector<BehaviorEvent> events;

  bool operator==(const UserSequence&) const = default;
};

struct Sample {
  UserSequence sequence;
  BehaviorEvent target;
  std::vector<std::int32_t> context;
  int label = 0;
  std::int64_t prediction_time = 0;

  bool operator==(const Sample&) const = default;
};

/// Table sizes for every categorical field. For side, context and user_side
/// index 0 is reserved for "missing" and counts towards the size.
struct VocabSizes {
  std::int32_t items = 0;
  std::int32_t categories = 0;
  std::int32_t side = 1;
  std::int32_t context = 1;
  std::int32_t user_side = 1;

  bool operator==(const VocabSizes&) const = default;
};

/// String-to-index maps for the behavior log. Item and category indices are
/// dense from 0; side indices start at 1.
struct Vocabulary {
  std::map<std::string, std::int32_t> items;
  std::map<std::string, std::int32_t> categories;
  std::map<std::string, std::int32_t> side;

  VocabSizes sizes() const;
};

Vocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab);

/// Scans a JSONL behavior log and indexes every item, category and side
/// value in sorted string order.
Vocabulary build_vocabulary(const std::filesystem::path& log_path);

struct LogSchema {
  std::size_t max_side_features = 1;
  std::size_t max_sequence_length = 1000;
};

/// Reads a JSONL behavior log. Events are grouped per user, sorted by
/// timestamp (stable), and users are returned ordered by id.
std::vector<UserSequence> load_events(const std::filesystem::path& path, const Vocabulary& vocab,
                                      const LogSchema& schema = {});

/// Writes sequences back out in the JSONL log format, one event per line.
void write_events(const std::filesystem::path& path, const std::vector<UserSequence>& sequences,
                  const Vocabulary& vocab);

/// Which windows of the history receive the target's category.
enum class Plant { kRandom, kNone, kLongRange, kRecent, kBoth, kMiddle };

Plant parse_plant(const std::string& name);

struct SyntheticConfig {
  std::size_t n_users = 1000;
  std::size_t seq_len = 100;
  std::int32_t n_items = 200;
  std::int32_t n_categories = 20;
  std::uint64_t seed = 0;
  Plant plant = Plant::kRandom;
  std::int32_t interests_per_user = 4;
  std::int32_t n_context = 4;
  std::int32_t n_user_side = 4;
  std::int32_t n_phases = 4;
};

/// First position (1-based) past the long-range window, and the first
/// position of the recent window.
std::size_t long_window_end(std::size_t seq_len);
std::size_t recent_window_begin(std::size_t seq_len);

std::int32_t synthetic_category_of(std::int32_t item, std::int32_t n_categories);
VocabSizes synthetic_vocab(const SyntheticConfig& cfg);

/// Sequences with a planted long/short range dependency between the
/// history and the target. Each user's stream is seeded from (seed, user).
std::vector<Sample> generate_synthetic(const SyntheticConfig& cfg);

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

/// Last event of each sequence becomes the target; a neg_ratio fraction of
/// targets is swapped for a never-clicked item with label 0. Samples whose
/// prediction time precedes cut_time go to train.
Dataset build_dataset(const std::vector<UserSequence>& sequences, std::int64_t cut_time,
                      double neg_ratio, std::uint64_t seed);

/// Splits by prediction time at the given quantile of prediction times.
Dataset split_by_time(const std::vector<Sample>& samples, double train_fraction);

struct SampleFile {
  VocabSizes vocab;
  std::vector<Sample> samples;
};

/// Sample files are JSONL: a header line with the vocabulary sizes, then one
/// sample per line using dense indices.
void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples,
                   const VocabSizes& vocab);
SampleFile read_samples(const std::filesystem::path& path);

}  // namespace hpmn
