#include "stvg/rewards.hpp"

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <fstream>

#include "internal/text.hpp"
#include "stvg/errors.hpp"

namespace stvg {

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0, pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

bool whitespace_only(const std::string& s) {
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  return true;
}

void skip_ws(const char*& p) {
  while (*p && std::isspace(static_cast<unsigned char>(*p))) ++p;
}

bool eat_key(const char*& p, const char* key) {
  skip_ws(p);
  const std::size_t n = std::strlen(key);
  if (std::strncmp(p, key, n) != 0) return false;
  p += n;
  skip_ws(p);
  if (*p != '=') return false;
  ++p;
  skip_ws(p);
  return true;
}

bool eat_double(const char*& p, double& out) {
  char* end = nullptr;
  out = std::strtod(p, &end);
  if (end == p) return false;
  p = end;
  return true;
}

bool eat_int(const char*& p, long long& out) {
  char* end = nullptr;
  out = std::strtoll(p, &end, 10);
  if (end == p) return false;
  p = end;
  return true;
}

std::optional<Answer> parse_answer_body(const std::string& body) {
  const char* p = body.c_str();
  double start = 0.0, end = 0.0;
  long long id = 0;
  if (!eat_key(p, "start") || !eat_double(p, start)) return std::nullopt;
  if (!eat_key(p, "end") || !eat_double(p, end)) return std::nullopt;
  if (!eat_key(p, "id") || !eat_int(p, id)) return std::nullopt;
  skip_ws(p);
  if (*p != '\0') return std::nullopt;
  if (start > end) return std::nullopt;
  return Answer{TemporalInterval{start, end}, id};
}

}  // namespace

Transcript parse_transcript(const std::string& text) {
  Transcript t;
  t.raw = text;

  constexpr const char* kThinkOpen = "<think>";
  constexpr const char* kThinkClose = "</think>";
  constexpr const char* kAnswerOpen = "<answer>";
  constexpr const char* kAnswerClose = "</answer>";

  const std::size_t n_to = count_occurrences(text, kThinkOpen);
  const std::size_t n_tc = count_occurrences(text, kThinkClose);
  const std::size_t n_ao = count_occurrences(text, kAnswerOpen);
  const std::size_t n_ac = count_occurrences(text, kAnswerClose);

  // The answer segment is extracted whenever it is unambiguous, so accuracy
  // can be scored on format-broken responses too.
  if (n_ao == 1 && n_ac == 1) {
    const std::size_t ao = text.find(kAnswerOpen);
    const std::size_t ac = text.find(kAnswerClose);
    if (ao + std::strlen(kAnswerOpen) <= ac) {
      t.answer_body = text.substr(ao + std::strlen(kAnswerOpen), ac - ao - std::strlen(kAnswerOpen));
      t.answer = parse_answer_body(t.answer_body);
    }
  }

  if (n_to != 1 || n_tc != 1 || n_ao != 1 || n_ac != 1) return t;
  const std::size_t to = text.find(kThinkOpen);
  const std::size_t tc = text.find(kThinkClose);
  const std::size_t ao = text.find(kAnswerOpen);
  const std::size_t ac = text.find(kAnswerClose);
  if (!(to < tc && tc < ao && ao < ac)) return t;
  if (!whitespace_only(text.substr(0, to))) return t;
  if (!whitespace_only(text.substr(tc + std::strlen(kThinkClose),
                                   ao - tc - std::strlen(kThinkClose))))
    return t;
  if (!whitespace_only(text.substr(ac + std::strlen(kAnswerClose)))) return t;

  t.think = text.substr(to + std::strlen(kThinkOpen), tc - to - std::strlen(kThinkOpen));
  t.structurally_valid = true;
  return t;
}

double reward_temporal(const std::optional<Answer>& answer, const TemporalInterval& gt_interval) {
  if (!answer) return 0.0;
  return temporal_iou(answer->interval, gt_interval);
}

double reward_spatial(const std::optional<Answer>& answer, int gt_id, const MaskDatabase& db) {
  if (!answer) return 0.0;
  if (answer->instance_id != gt_id) return 0.0;
  for (int f = 0; f < db.frame_count(); ++f) {
    const double t = db.frame_to_seconds(f);
    if (t < answer->interval.t_s || t > answer->interval.t_e) continue;
    for (const InstanceRecord& rec : db.records(f))
      if (rec.instance_id == gt_id) return 1.0;
  }
  return 0.0;
}

double reward_format(const Transcript& transcript) {
  return transcript.structurally_valid ? 1.0 : 0.0;
}

namespace {

double continuous_spatial(const std::optional<Answer>& answer, const GroundTruthTube& gt,
                          const MaskDatabase& db) {
  if (!answer) return 0.0;
  const FrameSpan pred = frame_span(answer->interval, db.fps(), db.frame_count());
  const FrameSpan truth = frame_span(gt.interval, db.fps(), db.frame_count());
  const int lo = std::max(pred.lo, truth.lo);
  const int hi = std::min(pred.hi, truth.hi);
  if (pred.empty() || truth.empty() || lo > hi) return 0.0;
  double sum = 0.0;
  for (int f = lo; f <= hi; ++f) {
    const auto pred_box = db.box_of(f, static_cast<int>(answer->instance_id));
    const auto gt_box = gt.box_at(f);
    if (pred_box && gt_box) sum += box_iou(*pred_box, *gt_box);
  }
  return sum / (hi - lo + 1);
}

}  // namespace

RewardBreakdown reward_total(const Transcript& transcript, const GroundTruthTube& gt, int gt_id,
                             const MaskDatabase& db, RewardVariant variant) {
  RewardBreakdown out;
  out.r_t = reward_temporal(transcript.answer, gt.interval);
  out.r_f = reward_format(transcript);
  switch (variant) {
    case RewardVariant::Decoupled:
      out.r_s = reward_spatial(transcript.answer, gt_id, db);
      out.total = out.r_t + out.r_s + out.r_f;
      break;
    case RewardVariant::Coupled:
      out.r_s = reward_spatial(transcript.answer, gt_id, db);
      out.total = out.r_t * out.r_s + out.r_t + out.r_f;
      break;
    case RewardVariant::ContinuousSpatial:
      out.r_s = continuous_spatial(transcript.answer, gt, db);
      out.total = out.r_t + out.r_s + out.r_f;
      break;
  }
  return out;
}

const char* reward_variant_token(RewardVariant variant) {
  switch (variant) {
    case RewardVariant::Decoupled: return "decoupled";
    case RewardVariant::Coupled: return "coupled";
    case RewardVariant::ContinuousSpatial: return "continuous_spatial";
  }
  return "decoupled";
}

RewardVariant reward_variant_from_token(const std::string& token) {
  if (token == "decoupled") return RewardVariant::Decoupled;
  if (token == "coupled") return RewardVariant::Coupled;
  if (token == "continuous_spatial") return RewardVariant::ContinuousSpatial;
  throw ConfigError("unknown reward variant '" + token + "'");
}

namespace {

std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c == '\\') out += "\\\\";
    else if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else out.push_back(c);
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    const char next = s[++i];
    if (next == 't') out.push_back('\t');
    else if (next == 'n') out.push_back('\n');
    else out.push_back(next);
  }
  return out;
}

}  // namespace

std::vector<TranscriptEntry> load_transcripts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "transcripts-v1")
    throw DataError(path + ": not a transcripts-v1 file");
  std::vector<TranscriptEntry> entries;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) + ": missing tab separator");
    entries.push_back({line.substr(0, tab), unescape(line.substr(tab + 1))});
  }
  return entries;
}

void save_transcripts(const std::string& path, const std::vector<TranscriptEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "transcripts-v1\n";
  for (const TranscriptEntry& e : entries) out << e.sample_id << '\t' << escape(e.text) << '\n';
  if (!out) throw DataError("failed writing '" + path + "'");
}

void write_reward_csv(const std::string& path, const std::vector<RewardRow>& rows,
                      RewardVariant variant) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "sample_id,r_t,r_s,r_f,total,variant\n";
  char buf[160];
  for (const RewardRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%s\n", row.sample_id.c_str(),
                  row.breakdown.r_t, row.breakdown.r_s, row.breakdown.r_f, row.breakdown.total,
                  reward_variant_token(variant));
    out << buf;
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace stvg
