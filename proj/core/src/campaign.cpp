#include "copilot/campaign.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "copilot/errors.hpp"

namespace copilot {

void parallel_for(std::size_t count, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn) {
  const auto workers = std::max<std::size_t>(1, std::min(parallelism, count));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first;
  std::mutex mu;
  auto work = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
        failed = true;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

CampaignResult run_campaign(const CampaignConfig& config,
                            std::span<const ReferenceDialogue> dialogues,
                            std::span<const SystemSpec> systems, const LlmClient& patient,
                            const LlmClient& judge, const PromptLibrary& prompts) {
  if (systems.empty()) throw PreconditionError("campaign needs at least one system");
  if (systems.size() > config.batch_limit) {
    throw PreconditionError(fmt::format("{} systems exceed the judge batch limit of {}",
                                        systems.size(), config.batch_limit));
  }
  if (dialogues.empty()) throw PreconditionError("campaign needs at least one dialogue");
  if (config.criteria.empty()) throw PreconditionError("campaign needs at least one criterion");

  CampaignResult result;
  for (const auto& s : systems) result.systems.push_back(s.name);
  result.criteria = config.criteria;
  const auto nd = dialogues.size();
  const auto ns = systems.size();
  const auto nc = config.criteria.size();

  result.transcripts.assign(nd, std::vector<SimulationTranscript>(ns));
  parallel_for(nd * ns, config.parallelism, [&](std::size_t job) {
    const auto d = job / ns;
    const auto s = job % ns;
    auto agent = systems[s].make_agent();
    auto t = simulate_consultation(patient, *agent, prompts, dialogues[d], config.max_turns);
    t.system = systems[s].name;
    result.transcripts[d][s] = std::move(t);
  });

  result.judgements.assign(nd, std::vector<std::vector<CriterionResult>>(nc));
  parallel_for(nd * nc, config.parallelism, [&](std::size_t job) {
    const auto d = job / nc;
    const auto c = job % nc;
    std::vector<JudgedDialogue> batch;
    for (std::size_t s = 0; s < ns; ++s) {
      batch.push_back({systems[s].name, result.transcripts[d][s].text()});
    }
    result.judgements[d][c] =
        judge_batch(judge, prompts, batch, config.criteria[c], nullptr, config.batch_limit);
  });

  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t c = 0; c < nc; ++c) {
      std::vector<CriterionResult> per_system;
      std::vector<double> ranks;
      for (std::size_t d = 0; d < nd; ++d) {
        const auto& r = result.judgements[d][c][s];
        per_system.push_back(r);
        if (r.rank) ranks.push_back(*r.rank);
      }
      CampaignRow row{systems[s].name, aggregate(per_system), std::nullopt};
      if (ranks.size() == nd) row.rank = moments(ranks);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

std::string format_table(const CampaignResult& result) {
  constexpr int kName = 24;
  constexpr int kCell = 14;
  std::string out = fmt::format("{:<{}}", "Models", kName);
  for (auto c : result.criteria) out += fmt::format("{:<{}}", criterion_title(c), 2 * kCell);
  out += '\n';
  out += fmt::format("{:<{}}", "", kName);
  for (std::size_t i = 0; i < result.criteria.size(); ++i) {
    out += fmt::format("{:<{}}{:<{}}", "Score", kCell, "Ranking", kCell);
  }
  out += '\n';
  const auto nc = result.criteria.size();
  for (std::size_t s = 0; s < result.systems.size(); ++s) {
    out += fmt::format("{:<{}}", result.systems[s], kName);
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& row = result.rows[s * nc + c];
      out += fmt::format("{:<{}}", fmt::format("{:.2f}±{:.2f}", row.score.mean, row.score.variance),
                         kCell + 1);  // '±' is two bytes, one column
      if (row.rank) {
        out += fmt::format("{:<{}}", fmt::format("{:.2f}±{:.2f}", row.rank->mean, row.rank->variance),
                           kCell + 1);
      } else {
        out += fmt::format("{:<{}}", "-", kCell);
      }
    }
    out += '\n';
  }
  return out;
}

std::string format_rows_jsonl(const CampaignResult& result) {
  std::string out;
  for (const auto& row : result.rows) {
    nlohmann::ordered_json j;
    j["model"] = row.system;
    j["criterion"] = to_string(row.score.criterion);
    j["mean"] = row.score.mean;
    j["variance"] = row.score.variance;
    j["n"] = row.score.n;
    j["sample_variance"] = row.score.sample_variance;
    j["rank_mean"] = row.rank ? nlohmann::ordered_json(row.rank->mean) : nlohmann::ordered_json(nullptr);
    j["rank_variance"] = row.rank ? nlohmann::ordered_json(row.rank->variance) : nlohmann::ordered_json(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace copilot
