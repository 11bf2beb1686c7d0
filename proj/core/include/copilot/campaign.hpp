#pragma once

// Evaluation campaigns: every system converses with the virtual patient on
// every sampled reference dialogue, then one judge call per (dialogue,
// criterion) scores and ranks all systems' transcripts side by side.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "copilot/simulation.hpp"

namespace copilot {

struct SystemSpec {
  std::string name;
  /// Fresh agent for one consultation. Called from worker threads.
  std::function<std::unique_ptr<ConsultationAgent>()> make_agent;
};

struct CampaignConfig {
  std::uint64_t seed = 0;
  std::size_t sample_size = 50;
  int min_rounds = 40;
  std::vector<CriterionId> criteria{all_criteria().begin(), all_criteria().end()};
  int max_turns = 20;
  std::size_t parallelism = 1;
  std::size_t batch_limit = kJudgeBatchLimit;
};

struct CampaignRow {
  std::string system;
  RunStats score;
  /// Present when the judge ranked every batch.
  std::optional<Moments> rank;
};

struct CampaignResult {
  std::vector<std::string> systems;
  std::vector<CriterionId> criteria;
  /// transcripts[d][s]: dialogue d, system s.
  std::vector<std::vector<SimulationTranscript>> transcripts;
  /// judgements[d][c]: one result per system, in system order.
  std::vector<std::vector<std::vector<CriterionResult>>> judgements;
  /// One row per (system, criterion), systems outer.
  std::vector<CampaignRow> rows;
};

/// Runs simulations and judge calls with up to `parallelism` worker threads.
/// Results are placed by index, so output order does not depend on
/// scheduling. Throws PreconditionError when there are more systems than the
/// judge batch limit.
CampaignResult run_campaign(const CampaignConfig& config,
                            std::span<const ReferenceDialogue> dialogues,
                            std::span<const SystemSpec> systems, const LlmClient& patient,
                            const LlmClient& judge, const PromptLibrary& prompts);

/// Score and Ranking columns per criterion as `mean±variance`.
std::string format_table(const CampaignResult& result);

/// One JSON object per row: {model, criterion, mean, variance, n,
/// sample_variance, rank_mean, rank_variance}.
std::string format_rows_jsonl(const CampaignResult& result);

/// Runs `fn(i)` for i in [0, count) on up to `parallelism` threads and
/// rethrows the first failure after all workers stop.
void parallel_for(std::size_t count, std::size_t parallelism,
                  const std::function<void(std::size_t)>& fn);

}  // namespace copilot
