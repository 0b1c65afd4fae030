#include "hpmn/data.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "hpmn/random.hpp"

namespace hpmn {

using nlohmann::json;

namespace {

std::map<std::string, std::int32_t> read_map(const json& j, const char* key) {
  std::map<std::string, std::int32_t> out;
  if (!j.contains(key)) return out;
  for (const auto& [name, idx] : j.at(key).items()) out.emplace(name, idx.get<std::int32_t>());
  return out;
}

std::int32_t max_index(const std::map<std::string, std::int32_t>& m) {
  std::int32_t top = -1;
  for (const auto& [_, idx] : m) top = std::max(top, idx);
  return top;
}

std::vector<std::string> invert(const std::map<std::string, std::int32_t>& m) {
  std::vector<std::string> names(static_cast<std::size_t>(max_index(m) + 1));
  for (const auto& [name, idx] : m) names[static_cast<std::size_t>(idx)] = name;
  return names;
}

std::int32_t lookup(const std::map<std::string, std::int32_t>& m, const std::string& key,
                    const char* field, std::size_t line) {
  const auto it = m.find(key);
  if (it == m.end()) throw DataError(std::string("out-of-vocabulary ") + field + " '" + key + "'", line);
  return it->second;
}

json event_to_json(const BehaviorEvent& e) {
  return json::array({e.item_id, e.category_id, e.timestamp, e.side_features});
}

BehaviorEvent event_from_json(const json& j) {
  BehaviorEvent e;
  e.item_id = j.at(0).get<std::int32_t>();
  e.category_id = j.at(1).get<std::int32_t>();
  e.timestamp = j.at(2).get<std::int64_t>();
  e.side_features = j.at(3).get<std::vector<std::int32_t>>();
  return e;
}

template <class Rng>
std::int32_t uniform_int(Rng& rng, std::int32_t lo, std::int32_t hi) {
  return std::uniform_int_distribution<std::int32_t>(lo, hi)(rng);
}

}  // namespace

VocabSizes Vocabulary::sizes() const {
  VocabSizes s;
  s.items = max_index(items) + 1;
  s.categories = max_index(categories) + 1;
  s.side = std::max(max_index(side) + 1, 1);
  return s;
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("malformed vocabulary file " + path.string() + ": " + e.what());
  }
  Vocabulary v;
  v.items = read_map(j, "item");
  v.categories = read_map(j, "cat");
  v.side = read_map(j, "side");
  for (const auto& [name, idx] : v.side) {
    if (idx < 1) throw DataError("side index 0 is reserved (entry '" + name + "')");
  }
  return v;
}

void save_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  json j;
  j["item"] = vocab.items;
  j["cat"] = vocab.categories;
  j["side"] = vocab.side;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  out << j.dump() << "\n";
}

Vocabulary build_vocabulary(const std::filesystem::path& log_path) {
  std::ifstream in(log_path);
  if (!in) throw DataError("cannot open behavior log " + log_path.string());
  std::set<std::string> items, cats, side;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(text);
      items.insert(j.at("item").get<std::string>());
      cats.insert(j.at("cat").get<std::string>());
      if (j.contains("side")) {
        for (const auto& s : j.at("side")) side.insert(s.get<std::string>());
      }
    } catch (const json::exception& e) {
      throw DataError(std::string("bad event record: ") + e.what(), line);
    }
  }
  Vocabulary v;
  for (const auto& s : items) v.items.emplace(s, static_cast<std::int32_t>(v.items.size()));
  for (const auto& s : cats) v.categories.emplace(s, static_cast<std::int32_t>(v.categories.size()));
  for (const auto& s : side) v.side.emplace(s, static_cast<std::int32_t>(v.side.size() + 1));
  return v;
}

std::vector<UserSequence> load_events(const std::filesystem::path& path, const Vocabulary& vocab,
                                      const LogSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open behavior log " + path.string());
  std::map<std::string, UserSequence> users;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), line);
    }
    BehaviorEvent event;
    std::string user;
    try {
      user = j.at("user").get<std::string>();
      event.item_id = lookup(vocab.items, j.at("item").get<std::string>(), "item", line);
      event.category_id = lookup(vocab.categories, j.at("cat").get<std::string>(), "cat", line);
      event.timestamp = j.at("ts").get<std::int64_t>();
      if (j.contains("side")) {
        for (const auto& s : j.at("side")) {
          event.side_features.push_back(lookup(vocab.side, s.get<std::string>(), "side", line));
        }
      }
    } catch (const json::exception& e) {
      throw DataError(std::string("bad event record: ") + e.what(), line);
    }
    if (event.timestamp < 0) throw DataError("negative timestamp", line);
    if (event.side_features.size() > schema.max_side_features) {
      throw DataError("too many side features (" + std::to_string(event.side_features.size()) +
                          " > " + std::to_string(schema.max_side_features) + ")",
                      line);
    }
    auto& seq = users[user];
    seq.user_id = user;
    seq.events.push_back(std::move(event));
  }
  std::vector<UserSequence> out;
  out.reserve(users.size());
  for (auto& [id, seq] : users) {
    std::stable_sort(seq.events.begin(), seq.events.end(),
                     [](const BehaviorEvent& a, const BehaviorEvent& b) {
                       return a.timestamp < b.timestamp;
                     });
    if (seq.events.size() > schema.max_sequence_length) {
      throw DataError("user '" + id + "' has " + std::to_string(seq.events.size()) +
                      " events, above the maximum of " +
                      std::to_string(schema.max_sequence_length));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

void write_events(const std::filesystem::path& path, const std::vector<UserSequence>& sequences,
                  const Vocabulary& vocab) {
  const auto items = invert(vocab.items);
  const auto cats = invert(vocab.categories);
  const auto side = invert(vocab.side);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write behavior log " + path.string());
  for (const auto& seq : sequences) {
    for (const auto& e : seq.events) {
      json j;
      j["user"] = seq.user_id;
      j["item"] = items.at(static_cast<std::size_t>(e.item_id));
      j["cat"] = cats.at(static_cast<std::size_t>(e.category_id));
      j["ts"] = e.timestamp;
      j["side"] = json::array();
      for (auto s : e.side_features) j["side"].push_back(side.at(static_cast<std::size_t>(s)));
      out << j.dump() << "\n";
    }
  }
}

Plant parse_plant(const std::string& name) {
  if (name == "random") return Plant::kRandom;
  if (name == "none") return Plant::kNone;
  if (name == "long") return Plant::kLongRange;
  if (name == "recent") return Plant::kRecent;
  if (name == "both") return Plant::kBoth;
  if (name == "middle") return Plant::kMiddle;
  throw std::invalid_argument("unknown plant mode '" + name + "'");
}

std::size_t long_window_end(std::size_t seq_len) { return seq_len / 4; }
std::size_t recent_window_begin(std::size_t seq_len) { return seq_len - 5; }

std::int32_t synthetic_category_of(std::int32_t item, std::int32_t n_categories) {
  return item % n_categories;
}

VocabSizes synthetic_vocab(const SyntheticConfig& cfg) {
  VocabSizes v;
  v.items = cfg.n_items;
  v.categories = cfg.n_categories;
  v.side = cfg.n_phases + 1;
  v.context = cfg.n_context + 1;
  v.user_side = cfg.n_user_side + 1;
  return v;
}

std::vector<Sample> generate_synthetic(const SyntheticConfig& cfg) {
  const std::size_t T = cfg.seq_len;
  if (T < 8) throw std::invalid_argument("generate_synthetic: sequence length must be >= 8");
  if (cfg.n_categories < 2) throw std::invalid_argument("generate_synthetic: need >= 2 categories");
  if (cfg.n_items < cfg.n_categories) {
    throw std::invalid_argument("generate_synthetic: need at least one item per category");
  }
  if (cfg.n_users == 0) throw std::invalid_argument("generate_synthetic: need >= 1 user");
  if (cfg.interests_per_user < 1 || cfg.interests_per_user > cfg.n_categories - 1) {
    throw std::invalid_argument("generate_synthetic: interests_per_user out of range");
  }
  if (cfg.n_context < 1 || cfg.n_user_side < 1 || cfg.n_phases < 1) {
    throw std::invalid_argument("generate_synthetic: context/user-side/phase counts must be >= 1");
  }

  // 1-based inclusive windows.
  const std::size_t long_end = long_window_end(T);
  const std::size_t recent_begin = recent_window_begin(T);
  const bool has_middle = long_end + 1 < recent_begin;
  if (cfg.plant == Plant::kMiddle && !has_middle) {
    throw std::invalid_argument("generate_synthetic: sequence too short for a middle window");
  }

  auto items_in = [&](std::int32_t cat) { return (cfg.n_items - cat + cfg.n_categories - 1) / cfg.n_categories; };

  std::vector<Sample> samples;
  samples.reserve(cfg.n_users);
  for (std::size_t u = 0; u < cfg.n_users; ++u) {
    auto rng = stream_rng(cfg.seed, u);
    Sample s;
    char id[32];
    std::snprintf(id, sizeof(id), "u%06zu", u);
    s.sequence.user_id = id;
    s.sequence.user_side = {uniform_int(rng, 1, cfg.n_user_side)};

    const std::int32_t target_item = uniform_int(rng, 0, cfg.n_items - 1);
    const std::int32_t target_cat = synthetic_category_of(target_item, cfg.n_categories);

    std::vector<std::int32_t> others;
    for (std::int32_t c = 0; c < cfg.n_categories; ++c) {
      if (c != target_cat) others.push_back(c);
    }
    std::shuffle(others.begin(), others.end(), rng);
    others.resize(static_cast<std::size_t>(cfg.interests_per_user));

    Plant plant = cfg.plant;
    if (plant == Plant::kRandom) {
      const int modes = has_middle ? 5 : 4;
      static constexpr Plant kModes[] = {Plant::kNone, Plant::kLongRange, Plant::kRecent,
                                         Plant::kBoth, Plant::kMiddle};
      plant = kModes[uniform_int(rng, 0, modes - 1)];
    }

    std::vector<std::int32_t> cats(T);
    for (auto& c : cats) c = others[static_cast<std::size_t>(uniform_int(rng, 0, cfg.interests_per_user - 1))];

    auto plant_in = [&](std::size_t first, std::size_t last) {
      std::vector<std::size_t> positions;
      for (std::size_t p = first; p <= last; ++p) positions.push_back(p);
      std::shuffle(positions.begin(), positions.end(), rng);
      const auto k = std::min<std::size_t>(positions.size(),
                                           static_cast<std::size_t>(uniform_int(rng, 1, 3)));
      for (std::size_t i = 0; i < k; ++i) cats[positions[i] - 1] = target_cat;
    };
    switch (plant) {
      case Plant::kLongRange: plant_in(1, long_end); break;
      case Plant::kRecent: plant_in(recent_begin, T); break;
      case Plant::kBoth:
        plant_in(1, long_end);
        plant_in(recent_begin, T);
        break;
      case Plant::kMiddle: plant_in(long_end + 1, recent_begin - 1); break;
      default: break;
    }

    const std::int64_t start = uniform_int(rng, 0, 999);
    s.sequence.events.resize(T);
    bool in_long = false;
    bool in_recent = false;
    for (std::size_t i = 1; i <= T; ++i) {
      auto& e = s.sequence.events[i - 1];
      e.category_id = cats[i - 1];
      e.item_id = e.category_id + cfg.n_categories * uniform_int(rng, 0, items_in(e.category_id) - 1);
      e.timestamp = start + static_cast<std::int64_t>(i);
      e.side_features = {1 + static_cast<std::int32_t>((i - 1) * static_cast<std::size_t>(cfg.n_phases) / T)};
      if (e.category_id == target_cat) {
        in_long = in_long || i <= long_end;
        in_recent = in_recent || i >= recent_begin;
      }
    }

    s.prediction_time = start + static_cast<std::int64_t>(T) + 1;
    s.target.item_id = target_item;
    s.target.category_id = target_cat;
    s.target.timestamp = s.prediction_time;
    s.context = {uniform_int(rng, 1, cfg.n_context)};
    const double p_click = (in_long || in_recent) ? 0.9 : 0.1;
    s.label = std::bernoulli_distribution(p_click)(rng) ? 1 : 0;
    samples.push_back(std::move(s));
  }
  return samples;
}

Dataset build_dataset(const std::vector<UserSequence>& sequences, std::int64_t cut_time,
                      double neg_ratio, std::uint64_t seed) {
  if (neg_ratio < 0.0 || neg_ratio > 1.0) {
    throw std::invalid_argument("build_dataset: neg_ratio must lie in [0, 1]");
  }
  std::map<std::int32_t, std::int32_t> catalog;
  for (const auto& seq : sequences) {
    for (const auto& e : seq.events) catalog.emplace(e.item_id, e.category_id);
  }

  Dataset out;
  for (const auto& seq : sequences) {
    if (seq.events.size() < 2) {
      throw DataError("user '" + seq.user_id + "' has fewer than 2 events");
    }
    auto rng = stream_rng(seed, fnv1a(seq.user_id));
    Sample s;
    s.sequence.user_id = seq.user_id;
    s.sequence.user_side = seq.user_side;
    s.sequence.events.assign(seq.events.begin(), seq.events.end() - 1);
    s.target = seq.events.back();
    s.label = 1;

    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < neg_ratio) {
      std::set<std::int32_t> clicked;
      for (const auto& e : seq.events) clicked.insert(e.item_id);
      std::vector<std::int32_t> candidates;
      for (const auto& [item, _] : catalog) {
        if (!clicked.contains(item)) candidates.push_back(item);
      }
      if (candidates.empty()) {
        throw DataError("user '" + seq.user_id +
                        "' clicked every item; no negative sample available");
      }
      const auto pick = std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng);
      s.target.item_id = candidates[pick];
      s.target.category_id = catalog.at(s.target.item_id);
      s.label = 0;
    }

    const auto last_ts = s.sequence.events.back().timestamp;
    s.prediction_time = std::max(s.target.timestamp, last_ts + 1);
    (s.prediction_time < cut_time ? out.train : out.test).push_back(std::move(s));
  }
  return out;
}

Dataset split_by_time(const std::vector<Sample>& samples, double train_fraction) {
  if (samples.empty()) return {};
  std::vector<std::int64_t> times;
  times.reserve(samples.size());
  for (const auto& s : samples) times.push_back(s.prediction_time);
  std::sort(times.begin(), times.end());
  const auto idx = std::min(times.size() - 1,
                            static_cast<std::size_t>(train_fraction * static_cast<double>(times.size())));
  const std::int64_t cut = train_fraction >= 1.0 ? std::numeric_limits<std::int64_t>::max() : times[idx];
  Dataset out;
  for (const auto& s : samples) (s.prediction_time < cut ? out.train : out.test).push_back(s);
  return out;
}

void write_samples(const std::filesystem::path& path, const std::vector<Sample>& samples,
                   const VocabSizes& vocab) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write sample file " + path.string());
  json header;
  header["format"] = "hpmn-samples";
  header["version"] = 1;
  header["vocab"] = {{"items", vocab.items},     {"categories", vocab.categories},
                     {"side", vocab.side},       {"context", vocab.context},
                     {"user_side", vocab.user_side}};
  out << header.dump() << "\n";
  for (const auto& s : samples) {
    json j;
    j["user"] = s.sequence.user_id;
    j["user_side"] = s.sequence.user_side;
    j["events"] = json::array();
    for (const auto& e : s.sequence.events) j["events"].push_back(event_to_json(e));
    j["target"] = event_to_json(s.target);
    j["context"] = s.context;
    j["label"] = s.label;
    j["prediction_time"] = s.prediction_time;
    out << j.dump() << "\n";
  }
}

SampleFile read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sample file " + path.string());
  SampleFile file;
  std::string text;
  std::size_t line = 0;
  try {
    if (!std::getline(in, text)) throw DataError("empty sample file " + path.string());
    ++line;
    const json header = json::parse(text);
    if (header.value("format", "") != "hpmn-samples") throw DataError("not a sample file", line);
    if (header.value("version", 0) != 1) throw DataError("unsupported sample file version", line);
    const auto& v = header.at("vocab");
    file.vocab.items = v.at("items").get<std::int32_t>();
    file.vocab.categories = v.at("categories").get<std::int32_t>();
    file.vocab.side = v.at("side").get<std::int32_t>();
    file.vocab.context = v.at("context").get<std::int32_t>();
    file.vocab.user_side = v.at("user_side").get<std::int32_t>();
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) continue;
      const json j = json::parse(text);
      Sample s;
      s.sequence.user_id = j.at("user").get<std::string>();
      s.sequence.user_side = j.at("user_side").get<std::vector<std::int32_t>>();
      for (const auto& e : j.at("events")) s.sequence.events.push_back(event_from_json(e));
      s.target = event_from_json(j.at("target"));
      s.context = j.at("context").get<std::vector<std::int32_t>>();
      s.label = j.at("label").get<int>();
      s.prediction_time = j.at("prediction_time").get<std::int64_t>();
      if (s.label != 0 && s.label != 1) throw DataError("label must be 0 or 1", line);
      file.samples.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed sample record: ") + e.what(), line);
  }
  return file;
}

}  // namespace hpmn
