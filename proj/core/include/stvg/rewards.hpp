#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stvg/identity.hpp"
#include "stvg/mask_db.hpp"

namespace stvg {

// Parsed prediction: a grounded interval plus an instance id.
struct Answer {
  TemporalInterval interval;
  long long instance_id = 0;

  bool operator==(const Answer&) const = default;
};

// A model response split into its reasoning and prediction segments.
// Structural validity (one think pair, then one answer pair, nothing else)
// and answer parseability are tracked independently.
struct Transcript {
  std::string raw;
  std::string think;
  std::string answer_body;
  bool structurally_valid = false;
  std::optional<Answer> answer;
};

// Never throws; every defect is encoded in the returned flags. The answer
// body must match `start=<float> end=<float> id=<int>` (whitespace-tolerant)
// with start <= end to produce a parsed Answer.
Transcript parse_transcript(const std::string& text);

enum class RewardVariant { Decoupled, Coupled, ContinuousSpatial };

struct RewardBreakdown {
  double r_t = 0.0;
  double r_s = 0.0;
  double r_f = 0.0;
  double total = 0.0;
};

// Interval IoU against the ground-truth segment; 0 without a parsed answer.
double reward_temporal(const std::optional<Answer>& answer, const TemporalInterval& gt_interval);

// 1 iff the predicted id is the ground-truth id and that id has a record in
// at least one frame whose timestamp falls inside the predicted interval.
double reward_spatial(const std::optional<Answer>& answer, int gt_id, const MaskDatabase& db);

// 1 iff the tag structure is intact; the answer body plays no part.
double reward_format(const Transcript& transcript);

// Full breakdown under a variant. Decoupled: r_t + r_s + r_f. Coupled:
// r_t*r_s + r_t + r_f. ContinuousSpatial swaps r_s for the mean per-frame
// box IoU over the frame intersection of the predicted and ground-truth
// intervals (0 when that intersection is empty).
RewardBreakdown reward_total(const Transcript& transcript, const GroundTruthTube& gt, int gt_id,
                             const MaskDatabase& db,
                             RewardVariant variant = RewardVariant::Decoupled);

const char* reward_variant_token(RewardVariant variant);
RewardVariant reward_variant_from_token(const std::string& token);

// Response import lines: sample_id<TAB>text, with backslash escapes for
// tab, newline and backslash inside the text.
struct TranscriptEntry {
  std::string sample_id;
  std::string text;
};

std::vector<TranscriptEntry> load_transcripts(const std::string& path);
void save_transcripts(const std::string& path, const std::vector<TranscriptEntry>& entries);

struct RewardRow {
  std::string sample_id;
  RewardBreakdown breakdown;
};

// CSV: sample_id,r_t,r_s,r_f,total,variant.
void write_reward_csv(const std::string& path, const std::vector<RewardRow>& rows,
                      RewardVariant variant);

}  // namespace stvg
