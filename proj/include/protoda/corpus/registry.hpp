#ifndef PROTODA_CORPUS_REGISTRY_HPP
#define PROTODA_CORPUS_REGISTRY_HPP

#include "protoda/corpus/utterance.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace protoda {

template <typename Item>
struct IntentPool {
  std::vector<Item> train;
  std::vector<Item> validation;

  std::size_t size() const { return train.size() + validation.size(); }
  const std::vector<Item>& split(Split s) const { return s == Split::train ? train : validation; }
  std::vector<Item>& split(Split s) { return s == Split::train ? train : validation; }
  bool operator==(const IntentPool&) const = default;
};

/// task id -> intent -> per-split samples. Ordered maps keep tasks and
/// intents sorted; samples keep insertion (source) order.
template <typename Item>
class BasicTaskRegistry {
 public:
  using IntentMap = std::map<std::string, IntentPool<Item>>;
  using TaskMap = std::map<std::string, IntentMap>;

  void add(const std::string& task, const std::string& intent, Split split, Item item) {
    tasks_[task][intent].split(split).push_back(std::move(item));
  }

  const TaskMap& tasks() const { return tasks_; }
  bool empty() const { return tasks_.empty(); }
  bool contains(const std::string& task) const { return tasks_.count(task) > 0; }

  const IntentMap& task(const std::string& id) const {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) throw std::out_of_range("unknown task: " + id);
    return it->second;
  }

  std::vector<std::string> task_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, intents] : tasks_) out.push_back(id);
    return out;
  }

  std::vector<std::string> intents(const std::string& task_id) const {
    std::vector<std::string> out;
    for (const auto& [name, pool] : task(task_id)) out.push_back(name);
    return out;
  }

  std::size_t intent_count() const {
    std::size_t n = 0;
    for (const auto& [id, intents] : tasks_) n += intents.size();
    return n;
  }

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& [id, intents] : tasks_)
      for (const auto& [name, pool] : intents) n += pool.size();
    return n;
  }

  /// Drops intents with fewer than `min_samples` samples across both splits,
  /// then tasks left with fewer than `min_intents` intents. Dropped task ids
  /// are appended to `dropped_tasks` when given.
  BasicTaskRegistry filtered(std::size_t min_samples, std::size_t min_intents,
                             std::vector<std::string>* dropped_tasks = nullptr) const {
    BasicTaskRegistry out;
    for (const auto& [id, intents] : tasks_) {
      IntentMap kept;
      for (const auto& [name, pool] : intents) {
        if (pool.size() >= min_samples) kept.emplace(name, pool);
      }
      if (kept.size() >= min_intents && !kept.empty()) {
        out.tasks_.emplace(id, std::move(kept));
      } else if (dropped_tasks) {
        dropped_tasks->push_back(id);
      }
    }
    return out;
  }

  /// Copy restricted to (task, intent) pairs accepted by `keep`.
  template <typename Pred>
  BasicTaskRegistry select(Pred keep) const {
    BasicTaskRegistry out;
    for (const auto& [id, intents] : tasks_) {
      for (const auto& [name, pool] : intents) {
        if (keep(id, name)) out.tasks_[id].emplace(name, pool);
      }
    }
    return out;
  }

  void merge(const BasicTaskRegistry& other) {
    for (const auto& [id, intents] : other.tasks_) {
      for (const auto& [name, pool] : intents) {
        auto& dst = tasks_[id][name];
        dst.train.insert(dst.train.end(), pool.train.begin(), pool.train.end());
        dst.validation.insert(dst.validation.end(), pool.validation.begin(),
                              pool.validation.end());
      }
    }
  }

  bool operator==(const BasicTaskRegistry&) const = default;

 private:
  TaskMap tasks_;
};

using TaskRegistry = BasicTaskRegistry<Utterance>;
using EmbeddedRegistry = BasicTaskRegistry<EmbeddedSample>;

}  // namespace protoda

#endif  // PROTODA_CORPUS_REGISTRY_HPP
