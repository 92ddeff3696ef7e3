#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/geo.hpp"
#include "chrono_shield/history_client.hpp"
#include "chrono_shield/mask.hpp"
#include "chrono_shield/shadow_attack.hpp"
#include "chrono_shield/synth.hpp"
#include "chrono_shield/time_travel.hpp"

namespace chrono_shield {

struct ExperimentConfig {
  std::uint64_t seed = 7;
  SynthConfig synth;
  TrainConfig train;
  AttackConfig attack;
  MaskParams mask;
  VotePolicy vote;
  MatchPolicy match;
  int history_per_sign = 3;
  Date current_date{2022, 6, 1};
  bool adversarial_baseline = true;
  int attack_workers = 1;  // images attacked concurrently

  // Pushes seed into the synth, train and PSO seeds.
  void apply_seed(std::uint64_t s);
};

// Where test sign `index` stands; sites are ~100 m apart so their histories never mix.
struct SignSite {
  GeoPoint location;
  double heading = 0.0;
};
SignSite sign_site(std::size_t index) noexcept;

struct VoterRow {
  std::string source;
  std::string date;  // ISO, empty for the current image
  int label = 0;
  double confidence = 0.0;
  friend bool operator==(const VoterRow&, const VoterRow&) = default;
};

struct ReportRow {
  std::string id;
  std::size_t site = 0;
  int true_label = 0;
  int clean_label = 0;
  double clean_confidence = 0.0;
  int adv_label = 0;
  double adv_confidence = 0.0;
  bool attack_success = false;
  int iterations = 0;
  std::size_t queries = 0;
  bool mask_fallback = false;  // full-frame mask used after NoContourFound

  // Defense columns; unset until run_defense_sweep.
  bool defended = false;
  std::optional<int> baseline_label;
  double baseline_confidence = 0.0;
  int voted_label = 0;
  double voted_confidence = 0.0;
  bool suspected_attack = false;
  std::vector<VoterRow> voters;  // current image first
  std::vector<std::string> warnings;
  std::string note;

  bool no_defense_correct() const noexcept { return adv_label == true_label; }
  bool baseline_correct() const noexcept { return baseline_label && *baseline_label == true_label; }
  bool defense_correct() const noexcept { return defended && voted_label == true_label; }
  // Every historical voter predicted the true label (and there were some).
  bool history_correct() const noexcept;

  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportAggregates {
  std::size_t test_images = 0;
  std::size_t clean_correct = 0;
  std::size_t attacked = 0;         // rows
  std::size_t attack_successes = 0;
  std::size_t defended_correct = 0;  // over successful attacks
  std::size_t baseline_correct = 0;  // over successful attacks
  std::size_t history_correct = 0;   // successful attacks whose historical voters were all right
  std::size_t defended_with_correct_history = 0;

  double clean_accuracy() const noexcept;
  double attack_success_rate() const noexcept;
  double defense_success_rate() const noexcept;
  double baseline_defense_rate() const noexcept;

  friend bool operator==(const ReportAggregates&, const ReportAggregates&) = default;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;  // kept sorted by id
  std::size_t test_images = 0;
  std::size_t clean_correct = 0;

  ReportAggregates aggregates() const;
  void sort_rows();
};

using ProgressFn = std::function<void(const std::string&)>;

// Attacks every test item the model classifies correctly. Masks come from
// generate_mask, falling back to the full frame when no contour is found.
ExperimentReport run_attack_sweep(const ModelWeights& model, std::span<const DatasetItem* const> test_items,
                                  const ExperimentConfig& config, std::vector<RasterImage>* adversarial = nullptr,
                                  const ProgressFn& progress = {});
// Same, against an arbitrary black-box victim.
ExperimentReport run_attack_sweep(const ScoringFunction& victim, std::span<const DatasetItem* const> test_items,
                                  const ExperimentConfig& config, std::vector<RasterImage>* adversarial = nullptr,
                                  const ProgressFn& progress = {});

// Writes root/manifest.json and history_per_sign clean re-renders of every
// test sign at its site, dated before config.current_date.
void build_archive(std::span<const DatasetItem* const> test_items, const ExperimentConfig& config,
                   const std::filesystem::path& root);

// Fills the defense columns of every row. adversarial[i] is the current image
// of rows[i]. Throws MissingArchive when archive_root is not a directory.
void run_defense_sweep(ExperimentReport& report, std::span<const RasterImage> adversarial, const ModelWeights& model,
                       const ModelWeights* baseline, const std::filesystem::path& archive_root,
                       const ExperimentConfig& config);

// Each training sample is replaced by a copy under a random polygon shadow
// (full-frame mask, attack darkening and vertex count).
std::vector<LabeledImage> shadow_augment(std::span<const LabeledImage> dataset, const AttackConfig& attack,
                                         std::uint64_t seed);
TrainResult train_adversarial_baseline(std::span<const LabeledImage> dataset, const ExperimentConfig& config,
                                       const EpochCallback& on_epoch = {});

struct SweepResult {
  ExperimentReport report;
  double clean_test_accuracy = 0.0;
  double train_seconds = 0.0;
  double baseline_train_seconds = 0.0;
  double sweep_seconds = 0.0;
};

// synth -> train -> attack -> archive -> defend -> report.{csv,json,txt} under out_dir.
SweepResult run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                      const ProgressFn& progress = {});

}  // namespace chrono_shield
