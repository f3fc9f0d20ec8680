#ifndef PROTODA_CORPUS_EPISODE_HPP
#define PROTODA_CORPUS_EPISODE_HPP

#include "protoda/corpus/registry.hpp"
#include "protoda/numerics/tensor.hpp"

#include <random>
#include <string>
#include <vector>

namespace protoda {

/// One meta-training episode: a task, all of its classes, and per class k
/// supports and q queries drawn with replacement.
template <typename Item>
struct Episode {
  std::string task_id;
  std::vector<std::string> classes;
  std::vector<std::vector<Item>> supports;  // [class][k]
  std::vector<std::vector<Item>> queries;   // [class][q]

  std::size_t class_count() const { return classes.size(); }
};

/// Picks a task uniformly, then for every class of that task draws `k`
/// supports and `q` queries uniformly with replacement from the class's
/// train partition.
template <typename Item>
Episode<Item> sample_episode(const BasicTaskRegistry<Item>& registry, Rng& rng, std::size_t k,
                             std::size_t q) {
  if (k < 1 || q < 1) throw std::invalid_argument("sample_episode: k and q must be >= 1");
  if (registry.empty()) throw std::invalid_argument("sample_episode: empty registry");
  const auto& tasks = registry.tasks();
  std::uniform_int_distribution<std::size_t> pick_task(0, tasks.size() - 1);
  auto it = std::next(tasks.begin(), static_cast<std::ptrdiff_t>(pick_task(rng)));

  Episode<Item> ep;
  ep.task_id = it->first;
  for (const auto& [intent, pool] : it->second) {
    if (pool.train.empty()) {
      throw std::invalid_argument("sample_episode: intent '" + intent + "' of task '" +
                                  it->first + "' has no train samples");
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.train.size() - 1);
    std::vector<Item> s;
    std::vector<Item> qs;
    s.reserve(k);
    qs.reserve(q);
    for (std::size_t i = 0; i < k; ++i) s.push_back(pool.train[pick(rng)]);
    for (std::size_t i = 0; i < q; ++i) qs.push_back(pool.train[pick(rng)]);
    ep.classes.push_back(intent);
    ep.supports.push_back(std::move(s));
    ep.queries.push_back(std::move(qs));
  }
  return ep;
}

}  // namespace protoda

#endif  // PROTODA_CORPUS_EPISODE_HPP
