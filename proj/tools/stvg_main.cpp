// Command-line front end: deterministic pipelines over the library, one
// subcommand per stage. Exit codes: 0 ok, 1 usage/config, 2 data, 3 internal.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stvg/config.hpp"
#include "stvg/errors.hpp"
#include "stvg/evaluation.hpp"
#include "stvg/grpo.hpp"
#include "stvg/identity.hpp"
#include "stvg/prompt_plan.hpp"
#include "stvg/rewards.hpp"
#include "stvg/simulator.hpp"

namespace fs = std::filesystem;
using namespace stvg;

namespace {

std::string sample_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "ep%04d", index);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path + "'");
}

// One corpus episode on disk: <dir>/<sample>/db.txt + detections.txt, with
// corpus-wide gt.txt and episodes.txt.
void cmd_simulate(const RunConfig& cfg, const std::string& out_dir, int episodes) {
  fs::create_directories(out_dir);
  std::vector<GtSample> gts;
  std::ostringstream episodes_text;
  episodes_text << "episodes-v1\n";
  for (int e = 0; e < episodes; ++e) {
    WorldConfig wc = cfg.simulator;
    wc.seed = cfg.simulator.seed + static_cast<std::uint64_t>(e);
    const World world = gen_world(wc);
    Episode ep = gen_episode(world, wc.seed * 31 + 7, cfg.episode);
    ep.sample_id = sample_name(e);

    const fs::path dir = fs::path(out_dir) / ep.sample_id;
    fs::create_directories(dir);
    ep.db.save((dir / "db.txt").string());
    render_detections(world, cfg.simulator.noise, wc.seed + 1).save((dir / "detections.txt").string());

    gts.push_back({ep.sample_id, ep.gt, {}});
    episodes_text << ep.sample_id << '|' << ep.target_id << '|' << ep.query_text;
    for (const EpisodeCandidate& c : ep.candidates)
      episodes_text << '|' << c.instance_id << ',' << c.interval.t_s << ',' << c.interval.t_e;
    episodes_text << '\n';
  }
  save_ground_truth((fs::path(out_dir) / "gt.txt").string(), gts);
  write_text((fs::path(out_dir) / "episodes.txt").string(), episodes_text.str());
  std::cout << "simulate: wrote " << episodes << " episode(s) under " << out_dir << "\n";
}

struct BuildDbArgs {
  std::string detections_path;
  std::string tracks_path;
  bool from_sim = false;
  std::string out_path;
  int frames = 0, height = 0, width = 0;
  bool no_redetect = false;
  bool no_backward = false;
};

void cmd_build_db(const RunConfig& cfg, const BuildDbArgs& args) {
  TubeBuildOptions opts = cfg.identity;
  if (args.no_redetect) opts.redetect_every = 0;
  if (args.no_backward) opts.backward = false;

  DetectionStream detections;
  std::unique_ptr<MaskPropagator> propagator;
  int frames = args.frames, height = args.height, width = args.width;

  if (args.from_sim) {
    const World world = gen_world(cfg.simulator);
    frames = world.frame_count();
    height = cfg.simulator.height;
    width = cfg.simulator.width;
    detections = args.detections_path.empty()
                     ? render_detections(world, cfg.simulator.noise, cfg.simulator.seed + 1)
                     : DetectionStream::load(args.detections_path);
    propagator = std::make_unique<MaskDbPropagator>(world.ground_truth_db());
  } else {
    detections = DetectionStream::load(args.detections_path);
    if (!args.tracks_path.empty()) {
      MaskDatabase tracks = MaskDatabase::load(args.tracks_path);
      frames = tracks.frame_count();
      height = tracks.height();
      width = tracks.width();
      propagator = std::make_unique<MaskDbPropagator>(std::move(tracks));
    } else {
      if (frames <= 0 || height <= 0 || width <= 0)
        throw ConfigError("build-db without --tracks needs --frames, --height and --width");
      propagator = std::make_unique<StaticPropagator>(frames);
    }
  }

  TubeBuildDiagnostics diag;
  const MaskDatabase db = assemble_tubes(detections, *propagator, frames, height, width, opts, &diag);
  db.save(args.out_path);
  std::cout << "build-db: instances=" << diag.instances << " first_frame=" << diag.seeded_first_frame
            << " redetected=" << diag.redetected << " truncations=" << diag.truncations
            << " skipped=" << diag.skipped_detections << "\n";
}

void cmd_plan_prompts(const RunConfig& cfg, const std::string& db_path, const std::string& out) {
  const MaskDatabase db = MaskDatabase::load(db_path);
  const PromptPlan plan = plan_prompts(db, cfg.prompt.theta, cfg.prompt.style);
  plan.save(out);
  std::size_t markers = 0;
  for (const auto& f : plan.frames) markers += f.size();
  std::cout << "plan-prompts: " << markers << " marker(s) across " << plan.frames.size()
            << " frame(s)\n";
}

void cmd_rasterize(const std::string& plan_path, const std::string& frames_path,
                   const std::string& out) {
  const PromptPlan plan = PromptPlan::load(plan_path);
  std::vector<RgbImage> frames;
  if (frames_path.empty()) {
    frames.assign(plan.frames.size(), RgbImage::filled(plan.height, plan.width, {0, 0, 0}));
  } else {
    frames = load_frames(frames_path);
  }
  frames = rasterize(plan, std::move(frames));
  save_frames(out, frames);
  std::cout << "rasterize: wrote " << frames.size() << " frame(s)\n";
}

MaskDatabase corpus_db(const std::string& corpus_dir, const std::string& sample_id) {
  return MaskDatabase::load((fs::path(corpus_dir) / sample_id / "db.txt").string());
}

struct ScoreArgs {
  std::string preds_path, gt_path, db_path, corpus_dir;
  bool repair = false;
  bool rvos = false;
  int tolerance = 0;
  std::string out_csv, out_md;
};

void add_rvos_scores(SampleScore& row, const Prediction& pred, const GtSample& gt,
                     const MaskDatabase& db, int tolerance) {
  if (gt.masks.empty())
    throw DataError("sample '" + gt.sample_id + "' carries no ground-truth masks");
  std::vector<RasterMask> pred_masks, gt_masks;
  for (const auto& [frame, mask] : gt.masks) {
    gt_masks.push_back(rle_decode(mask));
    RasterMask pm = RasterMask::zeros(mask.height, mask.width);
    if (frame >= 0 && frame < db.frame_count()) {
      for (const InstanceRecord& rec : db.records(frame)) {
        if (rec.instance_id == pred.instance_id) pm = rle_decode(rec.mask);
      }
    }
    pred_masks.push_back(std::move(pm));
  }
  const int tol = tolerance > 0 ? tolerance
                                : default_boundary_tolerance(gt_masks[0].height, gt_masks[0].width);
  const auto [j, f, jf] = score_rvos(pred_masks, gt_masks, tol);
  row.j = 100.0 * j;
  row.f = 100.0 * f;
}

void emit_report_files(const MetricReport& report, const std::string& out_csv,
                       const std::string& out_md) {
  if (!out_csv.empty()) write_text(out_csv, emit_report(report, ReportFormat::Csv));
  if (!out_md.empty()) write_text(out_md, emit_report(report, ReportFormat::Markdown));
}

void print_summary(const char* tag, const MetricReport& report) {
  std::cout << tag << ":";
  if (report.m_tiou) std::printf(" m_tIoU=%.2f", *report.m_tiou);
  if (report.m_viou) std::printf(" m_vIoU=%.2f", *report.m_viou);
  if (report.viou_at_03) std::printf(" vIoU@0.3=%.2f", *report.viou_at_03);
  if (report.viou_at_05) std::printf(" vIoU@0.5=%.2f", *report.viou_at_05);
  if (report.jf) std::printf(" J&F=%.2f", *report.jf);
  std::cout << "\n";
}

void cmd_score(const RunConfig& cfg, const ScoreArgs& args) {
  const std::vector<Prediction> preds = load_predictions(args.preds_path);
  const std::vector<GtSample> gts = load_ground_truth(args.gt_path);
  std::map<std::string, const Prediction*> by_id;
  for (const Prediction& p : preds) by_id[p.sample_id] = &p;

  const bool repair = args.repair || cfg.evaluation.repair;
  std::optional<MaskDatabase> shared;
  if (!args.db_path.empty()) shared = MaskDatabase::load(args.db_path);

  std::vector<SampleScore> rows;
  for (const GtSample& gt : gts) {
    const auto it = by_id.find(gt.sample_id);
    if (it == by_id.end()) throw DataError("no prediction for sample '" + gt.sample_id + "'");
    const MaskDatabase db = shared ? *shared : corpus_db(args.corpus_dir, gt.sample_id);
    SampleScore row = score_sample(*it->second, gt, db, repair);
    if (args.rvos) add_rvos_scores(row, *it->second, gt, db, args.tolerance);
    rows.push_back(std::move(row));
  }
  const MetricReport report = aggregate(std::move(rows));
  emit_report_files(report, args.out_csv, args.out_md);
  print_summary("score", report);
}

void cmd_upper_bound(const ScoreArgs& args, double theta) {
  const std::vector<GtSample> gts = load_ground_truth(args.gt_path);
  std::optional<MaskDatabase> shared;
  if (!args.db_path.empty()) shared = MaskDatabase::load(args.db_path);

  std::vector<SampleScore> rows;
  for (const GtSample& gt : gts) {
    MaskDatabase db = shared ? *shared : corpus_db(args.corpus_dir, gt.sample_id);
    if (theta > 0.0) db = db.filter_small(theta);
    MetricReport one = upper_bound(db, {gt});
    rows.push_back(one.rows[0]);
  }
  const MetricReport report = aggregate(std::move(rows));
  emit_report_files(report, args.out_csv, args.out_md);
  print_summary("upper-bound", report);
}

void cmd_repair(const RunConfig& cfg, const std::string& db_path, int target_id, double start,
                double end, const std::string& out) {
  const MaskDatabase db = MaskDatabase::load(db_path);
  const Prediction pred{"cli", {start, end}, target_id};
  RepairStats stats;
  const RepairedDbView view =
      id_repair(pred, db, target_id, &stats, cfg.identity.iou_gate, cfg.identity.overlap_gate);

  // Materialize the view. Relabeled records adopt the target's category so
  // the output satisfies the database's one-category-per-id rule.
  MaskDatabase repaired(db.height(), db.width(), db.fps(), db.frame_count());
  const std::string target_category =
      db.has_instance(target_id) ? db.category_of(target_id) : "object";
  for (int f = 0; f < db.frame_count(); ++f) {
    for (const InstanceRecord& rec : view.records(f)) {
      InstanceRecord out_rec = rec;
      if (out_rec.instance_id == target_id) out_rec.category = target_category;
      repaired.insert(f, std::move(out_rec));
    }
  }
  repaired.save(out);
  std::cout << "repair: frames=" << stats.frames_processed
            << " gate_relabels=" << stats.gate_relabels
            << " reused=" << stats.reused_corrections
            << " fallback=" << stats.fallback_relabels
            << " boxless=" << stats.frames_without_boxes << "\n";
}

void cmd_train_toy(const RunConfig& cfg, const std::string& out_curve,
                   const std::string& out_policy) {
  ToyEnv::Options env_opts;
  env_opts.world = cfg.simulator;
  env_opts.episode = cfg.episode;
  env_opts.pool_size = cfg.grpo_pool_size;
  env_opts.seed = cfg.grpo.seed;
  const ToyEnv env(env_opts);
  const TrainResult result = train_toy(env, cfg.grpo);
  if (!out_curve.empty()) write_curve_csv(out_curve, result.curve);
  if (!out_policy.empty()) result.policy.save(out_policy);
  double tail = 0.0;
  const int window = std::min<int>(50, result.curve.size());
  for (int i = static_cast<int>(result.curve.size()) - window;
       i < static_cast<int>(result.curve.size()); ++i)
    tail += result.curve[i].mean_reward;
  if (window > 0) tail /= window;
  std::cout << "train-toy: updates=" << result.curve.size() << " tail_mean_reward=" << tail
            << "\n";
}

void cmd_report(const std::string& in_csv, const std::string& format, const std::string& out) {
  std::ifstream in(in_csv, std::ios::binary);
  if (!in) throw DataError("cannot open '" + in_csv + "'");
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,tiou,viou,j,f")
    throw DataError(in_csv + ": not a per-sample score CSV");
  std::vector<SampleScore> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, t, v, j, f;
    std::getline(ss, id, ',');
    std::getline(ss, t, ',');
    std::getline(ss, v, ',');
    std::getline(ss, j, ',');
    std::getline(ss, f, ',');
    try {
      SampleScore row;
      row.sample_id = id;
      row.tiou = std::stod(t);
      row.viou = std::stod(v);
      if (!j.empty()) row.j = std::stod(j);
      if (!f.empty()) row.f = std::stod(f);
      rows.push_back(std::move(row));
    } catch (const std::exception&) {
      throw DataError(in_csv + ":" + std::to_string(line_no) + ": malformed row");
    }
  }
  const MetricReport report = aggregate(std::move(rows));
  const std::string text =
      emit_report(report, format == "csv" ? ReportFormat::Csv : ReportFormat::Markdown);
  if (out.empty()) {
    std::cout << text;
  } else {
    write_text(out, text);
  }
  print_summary("report", report);
}

int run(int argc, char** argv) {
  // The config file must be known before option defaults are bound.
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) config_path = argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) config_path = arg.substr(9);
  }
  RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);

  CLI::App app{"Object-centric video grounding toolkit: synthetic worlds, instance-id"
               " databases, verifiable rewards, GRPO training and grounding metrics"};
  app.require_subcommand(0, 1);
  std::string config_opt;
  app.add_option("--config", config_opt, "JSON config file (section per subsystem)");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the resolved config as JSON");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a deterministic episode corpus");
  std::string sim_out = cfg.paths.out_dir;
  int sim_episodes = 1;
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--episodes", sim_episodes, "number of episodes")->check(CLI::PositiveNumber);
  sim->add_option("--seed", cfg.simulator.seed, "base world seed");
  sim->add_option("--objects-min", cfg.simulator.min_objects);
  sim->add_option("--objects-max", cfg.simulator.max_objects);
  sim->add_option("--duration", cfg.simulator.duration_s, "seconds");
  sim->add_option("--candidates", cfg.episode.candidate_count);
  sim->add_flag("--lanes", cfg.simulator.lanes, "disjoint-lane worlds (no occlusion)");
  sim->add_flag("--subspan", cfg.episode.subspan, "truth interval is a lifespan sub-span");

  // build-db
  auto* build = app.add_subcommand("build-db", "assemble an instance database from detections");
  BuildDbArgs build_args;
  build->add_option("--detections", build_args.detections_path, "detections CSV");
  build->add_option("--tracks", build_args.tracks_path, "mask database driving propagation");
  build->add_flag("--sim", build_args.from_sim, "simulate the world from the config instead");
  build->add_option("--out", build_args.out_path, "output database path")->required();
  build->add_option("--frames", build_args.frames);
  build->add_option("--height", build_args.height);
  build->add_option("--width", build_args.width);
  build->add_flag("--no-redetection", build_args.no_redetect);
  build->add_flag("--no-backward-tracking", build_args.no_backward);
  build->add_option("--redetect-every", cfg.identity.redetect_every);
  build->add_option("--iou-gate", cfg.identity.iou_gate);
  build->add_option("--overlap-gate", cfg.identity.overlap_gate);
  build->add_option("--confidence", cfg.identity.confidence_min);

  // plan-prompts
  auto* plan = app.add_subcommand("plan-prompts", "plan marker labels and anchors");
  std::string plan_db, plan_out;
  plan->add_option("--db", plan_db, "mask database")->required();
  plan->add_option("--out", plan_out, "plan file")->required();
  plan->add_option("--theta", cfg.prompt.theta, "size filter threshold");
  std::string plan_glyphs;
  plan->add_option("--glyphs", plan_glyphs, "numbers|upper|lower|mixed");
  plan->add_option("--font-size", cfg.prompt.style.font_size);

  // rasterize
  auto* raster = app.add_subcommand("rasterize", "stamp planned markers onto frames");
  std::string raster_plan, raster_frames, raster_out;
  raster->add_option("--plan", raster_plan)->required();
  raster->add_option("--frames", raster_frames, "raw RGB frames (defaults to blank frames)");
  raster->add_option("--out", raster_out)->required();

  // score
  auto* score = app.add_subcommand("score", "score predictions against ground truth");
  ScoreArgs score_args;
  score->add_option("--preds", score_args.preds_path)->required();
  score->add_option("--gt", score_args.gt_path)->required();
  auto* score_db = score->add_option("--db", score_args.db_path, "shared mask database");
  auto* score_corpus =
      score->add_option("--corpus", score_args.corpus_dir, "per-sample database directory");
  score->add_flag("--repair", score_args.repair, "run ID repair before spatial scoring");
  score->add_flag("--rvos", score_args.rvos, "add J/F mask metrics (needs gt masks)");
  score->add_option("--tolerance", score_args.tolerance, "boundary tolerance in pixels");
  score->add_option("--out-csv", score_args.out_csv);
  score->add_option("--out-md", score_args.out_md);
  score_db->excludes(score_corpus);

  // upper-bound
  auto* ub = app.add_subcommand("upper-bound", "best achievable score for a database");
  ScoreArgs ub_args;
  double ub_theta = cfg.evaluation.theta;
  ub->add_option("--gt", ub_args.gt_path)->required();
  auto* ub_db = ub->add_option("--db", ub_args.db_path);
  auto* ub_corpus = ub->add_option("--corpus", ub_args.corpus_dir);
  ub->add_option("--theta", ub_theta, "evaluation-side size filter");
  ub->add_option("--out-csv", ub_args.out_csv);
  ub->add_option("--out-md", ub_args.out_md);
  ub_db->excludes(ub_corpus);

  // repair
  auto* rep = app.add_subcommand("repair", "materialize an ID-repaired database");
  std::string rep_db, rep_out;
  int rep_target = 0;
  double rep_start = 0.0, rep_end = 0.0;
  rep->add_option("--db", rep_db)->required();
  rep->add_option("--target-id", rep_target)->required();
  rep->add_option("--start", rep_start, "segment start, seconds")->required();
  rep->add_option("--end", rep_end, "segment end, seconds")->required();
  rep->add_option("--out", rep_out)->required();

  // train-toy
  auto* train = app.add_subcommand("train-toy", "GRPO training on the toy policy");
  std::string train_curve, train_policy;
  std::string train_variant;
  bool no_format = false;
  train->add_option("--out-curve", train_curve, "learning-curve CSV");
  train->add_option("--out-policy", train_policy, "final policy JSON");
  train->add_option("--updates", cfg.grpo.update_count);
  train->add_option("--seed", cfg.grpo.seed);
  train->add_option("--group-size", cfg.grpo.group_size);
  train->add_option("--beta", cfg.grpo.kl_beta);
  train->add_option("--epsilon", cfg.grpo.clip_epsilon);
  train->add_option("--lr", cfg.grpo.learning_rate);
  train->add_option("--pool", cfg.grpo_pool_size);
  train->add_option("--reward-variant", train_variant, "decoupled|coupled|continuous_spatial");
  train->add_flag("--no-format-reward", no_format, "drop r_f from the optimized total");

  // report
  auto* report = app.add_subcommand("report", "re-aggregate a per-sample CSV");
  std::string report_in, report_format = "markdown", report_out;
  report->add_option("--in", report_in)->required();
  report->add_option("--format", report_format)->check(CLI::IsMember({"csv", "markdown"}));
  report->add_option("--out", report_out, "output path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  if (!plan_glyphs.empty()) {
    if (plan_glyphs == "numbers") cfg.prompt.style.glyphs = GlyphSet::Numbers;
    else if (plan_glyphs == "upper") cfg.prompt.style.glyphs = GlyphSet::UppercaseLetters;
    else if (plan_glyphs == "lower") cfg.prompt.style.glyphs = GlyphSet::LowercaseLetters;
    else if (plan_glyphs == "mixed") cfg.prompt.style.glyphs = GlyphSet::Mixed;
    else throw ConfigError("unknown glyph set '" + plan_glyphs + "'");
  }
  if (!train_variant.empty()) cfg.reward_variant = reward_variant_from_token(train_variant);
  cfg.grpo.variant = cfg.reward_variant;
  if (no_format) cfg.grpo.include_format_reward = false;

  if (print_config) std::cout << cfg.to_json_text();

  if (sim->parsed()) cmd_simulate(cfg, sim_out, sim_episodes);
  if (build->parsed()) cmd_build_db(cfg, build_args);
  if (plan->parsed()) cmd_plan_prompts(cfg, plan_db, plan_out);
  if (raster->parsed()) cmd_rasterize(raster_plan, raster_frames, raster_out);
  if (score->parsed()) {
    if (score_args.db_path.empty() && score_args.corpus_dir.empty())
      throw ConfigError("score needs --db or --corpus for spatial metrics");
    cmd_score(cfg, score_args);
  }
  if (ub->parsed()) {
    if (ub_args.db_path.empty() && ub_args.corpus_dir.empty())
      throw ConfigError("upper-bound needs --db or --corpus");
    cmd_upper_bound(ub_args, ub_theta);
  }
  if (rep->parsed()) cmd_repair(cfg, rep_db, rep_target, rep_start, rep_end, rep_out);
  if (train->parsed()) cmd_train_toy(cfg, train_curve, train_policy);
  if (report->parsed()) cmd_report(report_in, report_format, report_out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
