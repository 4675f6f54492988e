#include "lulc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <omp.h>

#include "lulc/checkpoint.hpp"
#include "lulc/landstat.hpp"
#include "lulc/preprocess.hpp"
#include "lulc/raster_io.hpp"
#include "lulc/rng.hpp"
#include "lulc/sampler.hpp"
#include "lulc/sccar_io.hpp"
#include "lulc/synth.hpp"
#include "lulc/tiler.hpp"
#include "lulc/train.hpp"

namespace lulc {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Globals {
  int workers = 0;
  std::uint64_t seed = 0;
};

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw FormatError(FormatErrorKind::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CategoricalRaster> load_rasters(const fs::path& dir) {
  std::vector<CategoricalRaster> out;
  for (const auto& p : list_files(dir, ".cras")) out.push_back(load_raster(p));
  if (out.empty()) throw FormatError(FormatErrorKind::Io, "no .cras files in " + dir.string());
  return out;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw UsageError(std::string("bad ") + what + " list entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError(std::string("empty ") + what + " list");
  return out;
}

std::string numbered(const std::string& stem, int i, const std::string& ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "_%04d", i);
  return stem + buf + ext;
}

PixelConstrainedCnn<float> load_checkpoint(const fs::path& path) { return load_model(read_file(path)); }

fs::path output_dir_of(const fs::path& file) {
  const fs::path parent = file.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw FormatError(FormatErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

// Fully resolved flags of the selected subcommand, defaults included.
json resolved_flags(const CLI::App& app) {
  json flags = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h") continue;
    std::string key = opt->get_lnames().empty() ? name : opt->get_lnames().front();
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_type_size() == 0) {
        flags[key] = true;
      } else {
        flags[key] = r.size() == 1 ? json(r.front()) : json(r);
      }
    } else if (opt->get_type_size() == 0) {
      flags[key] = false;
    } else {
      flags[key] = opt->get_default_str();
    }
  }
  return flags;
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err), app_("Land-use raster completion toolkit", "lulc") {
    app_.option_defaults()->always_capture_default();
    app_.require_subcommand(1);
    app_.fallthrough();
    app_.add_option("--workers", globals_.workers, "Worker threads for sampling and kernels (0 = all cores)")
        ->check(CLI::NonNegativeNumber);
    app_.add_option("--seed", globals_.seed, "Random seed");
    add_synth();
    add_prepare();
    add_train();
    add_sample();
    add_inpaint();
    add_tile_infill();
    add_stats();
    add_calibrate();
    add_score();
    add_likelihood_map();
    add_sccar_fit();
    add_sccar_inpaint();
    add_export_ppm();
  }

  int run(std::vector<std::string> args) {
    std::reverse(args.begin(), args.end());
    try {
      app_.parse(args);
    } catch (const CLI::CallForHelp&) {
      out_ << app_.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app_.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err_ << "error: " << e.what() << "\n\n";
      const auto subs = app_.get_subcommands();
      err_ << (subs.empty() ? app_.help() : subs.front()->help());
      return 1;
    }
    try {
      if (globals_.workers > 0) omp_set_num_threads(globals_.workers);
      CLI::App* sub = app_.get_subcommands().front();
      handlers_.at(sub->get_name())();
      write_run_json(*sub);
      return 0;
    } catch (const UsageError& e) {
      err_ << "usage error: " << e.what() << '\n';
      return 1;
    } catch (const FormatError& e) {
      err_ << "data error: " << e.what() << '\n';
      return 2;
    } catch (const fs::filesystem_error& e) {
      err_ << "data error: " << e.what() << '\n';
      return 2;
    } catch (const json::exception& e) {
      err_ << "data error: " << e.what() << '\n';
      return 2;
    } catch (const NumericalError& e) {
      err_ << "numerical error: " << e.what() << '\n';
      return 3;
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << '\n';
      return 3;
    }
  }

 private:
  CLI::App* sub(const std::string& name, const std::string& help, std::function<void()> handler) {
    CLI::App* s = app_.add_subcommand(name, help);
    handlers_[name] = std::move(handler);
    return s;
  }

  void write_run_json(const CLI::App& s) {
    json run{{"subcommand", s.get_name()},
             {"seed", globals_.seed},
             {"workers", globals_.workers},
             {"flags", resolved_flags(s)}};
    ensure_dir(run_dir_);
    write_text_atomic(run_dir_ / "run.json", run.dump(2) + "\n");
  }

  void write_csv(const std::string& path, const std::string& text) {
    if (path.empty()) {
      out_ << text;
    } else {
      run_dir_ = output_dir_of(path);
      ensure_dir(run_dir_);
      write_text_atomic(path, text);
    }
  }

  // ---- synth
  struct {
    std::string out, out_dir, mask_out, hole;
    int height = 64, width = 64, classes = 5, count = 1;
  } synth_;
  void add_synth() {
    auto* s = sub("synth", "Generate synthetic categorical landscapes", [this] { run_synth(); });
    s->add_option("--out", synth_.out, "Output CRAS path (single raster)");
    s->add_option("--out-dir", synth_.out_dir, "Output directory for --count rasters");
    s->add_option("--count", synth_.count, "Number of rasters")->check(CLI::PositiveNumber);
    s->add_option("--height", synth_.height)->check(CLI::Range(1, 65535));
    s->add_option("--width", synth_.width)->check(CLI::Range(1, 65535));
    s->add_option("--classes", synth_.classes, "Number of classes K")->check(CLI::Range(2, 255));
    s->add_option("--hole", synth_.hole, "Missing rectangle ROW,COL,HEIGHT,WIDTH for --mask-out");
    s->add_option("--mask-out", synth_.mask_out, "Write a CMSK mask with the --hole rectangle missing");
  }
  void run_synth() {
    if (synth_.out.empty() == synth_.out_dir.empty()) throw UsageError("synth: give exactly one of --out or --out-dir");
    if (!synth_.out.empty() && synth_.count != 1) throw UsageError("synth: --count needs --out-dir");
    if (!synth_.mask_out.empty()) {
      if (synth_.hole.empty()) throw UsageError("synth: --mask-out needs --hole");
      const auto h = parse_list<int>(synth_.hole, "hole");
      if (h.size() != 4) throw UsageError("synth: --hole needs ROW,COL,HEIGHT,WIDTH");
      if (h[0] < 0 || h[1] < 0 || h[2] < 0 || h[3] < 0 || h[0] + h[2] > synth_.height || h[1] + h[3] > synth_.width)
        throw UsageError("synth: hole outside the raster");
      save_mask(synth_.mask_out, PixelMask::with_hole(synth_.height, synth_.width, h[0], h[1], h[2], h[3]));
    }
    if (!synth_.out.empty()) {
      run_dir_ = output_dir_of(synth_.out);
      ensure_dir(run_dir_);
      save_raster(synth_.out, synth_landscape(synth_.height, synth_.width, synth_.classes, globals_.seed));
      return;
    }
    run_dir_ = synth_.out_dir;
    ensure_dir(run_dir_);
    for (int i = 0; i < synth_.count; ++i)
      save_raster(run_dir_ / numbered("synth", i, ".cras"),
                  synth_landscape(synth_.height, synth_.width, synth_.classes, derive_seed(globals_.seed, i)));
  }

  // ---- prepare
  struct {
    std::vector<std::string> inputs;
    std::string input_dir, out_dir;
    int factor = 1, window = 40, count = 100, water_class = kOpenWaterClass;
    double water_limit = 0.5;
  } prep_;
  void add_prepare() {
    auto* s = sub("prepare", "Coarsen source rasters and extract training windows", [this] { run_prepare(); });
    s->add_option("--inputs", prep_.inputs, "Source CRAS files")->delimiter(',');
    s->add_option("--input-dir", prep_.input_dir, "Directory of source CRAS files");
    s->add_option("--out-dir", prep_.out_dir)->required();
    s->add_option("--factor", prep_.factor, "Majority coarsening factor")->check(CLI::PositiveNumber);
    s->add_option("--window", prep_.window)->check(CLI::PositiveNumber);
    s->add_option("--count", prep_.count)->check(CLI::PositiveNumber);
    s->add_option("--water-class", prep_.water_class);
    s->add_option("--water-limit", prep_.water_limit, "Reject windows above this water fraction");
  }
  void run_prepare() {
    std::vector<CategoricalRaster> sources;
    for (const auto& p : prep_.inputs) sources.push_back(load_raster(p));
    if (!prep_.input_dir.empty())
      for (auto& r : load_rasters(prep_.input_dir)) sources.push_back(std::move(r));
    if (sources.empty()) throw UsageError("prepare: no inputs");
    if (prep_.factor > 1)
      for (auto& s : sources) s = coarsen_majority(s, prep_.factor);
    WindowSpec spec;
    spec.window = prep_.window;
    spec.count = prep_.count;
    spec.water_class = prep_.water_class;
    spec.water_limit = prep_.water_limit;
    spec.seed = globals_.seed;
    const WindowSet set = extract_windows(sources, spec);
    run_dir_ = prep_.out_dir;
    ensure_dir(run_dir_);
    for (std::size_t i = 0; i < set.windows.size(); ++i)
      save_raster(run_dir_ / numbered("window", static_cast<int>(i), ".cras"), set.windows[i]);
    write_text_atomic(run_dir_ / "manifest.json", json(set.manifest).dump(2) + "\n");
  }

  // ---- train
  struct {
    std::string data, valid, checkpoint, log, resume, preset = "desk";
    int epochs = 30, batch_size = 64;
    double lr = 5e-4, valid_fraction = 0.1;
    int blocks = 0, filters = 0, kernel = 0, aux_blocks = 0, aux_filters = 0, se_reduction = 0;
  } train_;
  void add_train() {
    auto* s = sub("train", "Train the pixel-constrained CNN", [this] { run_train(); });
    s->add_option("--data", train_.data, "Directory of training CRAS windows")->required();
    s->add_option("--valid", train_.valid, "Directory of held-out windows (default: split from --data)");
    s->add_option("--valid-fraction", train_.valid_fraction)->check(CLI::Range(0.0, 0.9));
    s->add_option("--checkpoint", train_.checkpoint, "Output checkpoint")->required();
    s->add_option("--log", train_.log, "Output CSV training log");
    s->add_option("--resume", train_.resume, "Resume from checkpoint");
    s->add_option("--preset", train_.preset, "Architecture preset")->check(CLI::IsMember({"desk", "paper"}));
    s->add_option("--epochs", train_.epochs)->check(CLI::NonNegativeNumber);
    s->add_option("--batch-size", train_.batch_size)->check(CLI::PositiveNumber);
    s->add_option("--lr", train_.lr)->check(CLI::PositiveNumber);
    s->add_option("--blocks", train_.blocks, "Gated blocks (0 = preset)");
    s->add_option("--filters", train_.filters, "Gated filters (0 = preset)");
    s->add_option("--kernel", train_.kernel, "Kernel size (0 = preset)");
    s->add_option("--aux-blocks", train_.aux_blocks, "Auxiliary residual blocks (0 = preset)");
    s->add_option("--aux-filters", train_.aux_filters, "Auxiliary filters (0 = preset)");
    s->add_option("--se-reduction", train_.se_reduction, "Squeeze-excite reduction (0 = preset)");
  }
  void run_train() {
    std::vector<CategoricalRaster> data = load_rasters(train_.data);
    std::vector<CategoricalRaster> valid;
    if (!train_.valid.empty()) {
      valid = load_rasters(train_.valid);
    } else if (train_.valid_fraction > 0.0 && data.size() >= 2) {
      const std::size_t n_valid = std::max<std::size_t>(1, static_cast<std::size_t>(train_.valid_fraction * data.size()));
      valid.assign(data.end() - static_cast<std::ptrdiff_t>(n_valid), data.end());
      data.resize(data.size() - n_valid);
    }
    const int H = data.front().height();
    if (data.front().width() != H) throw FormatError(FormatErrorKind::DimensionMismatch, "train: windows must be square");
    std::optional<PixelConstrainedCnn<float>> model;
    std::optional<AdamState> adam;
    if (!train_.resume.empty()) {
      Checkpoint ck = decode_checkpoint(read_file(train_.resume));
      adam = ck.adam;
      model.emplace(ck.config.get<ModelConfig>(), std::move(ck.params));
    } else {
      ModelConfig c = train_.preset == "paper" ? ModelConfig::paper() : ModelConfig::desk();
      c.image_size = H;
      c.K = data.front().num_classes();
      if (train_.blocks) c.num_gated_blocks = train_.blocks;
      if (train_.filters) c.filters = train_.filters;
      if (train_.kernel) c.kernel_size = train_.kernel;
      if (train_.aux_blocks) c.aux_residual_blocks = train_.aux_blocks;
      if (train_.aux_filters) c.aux_filters = train_.aux_filters;
      if (train_.se_reduction) c.squeeze_excite_reduction = train_.se_reduction;
      model.emplace(c, globals_.seed);
    }
    TrainOptions opt;
    opt.epochs = train_.epochs;
    opt.batch_size = train_.batch_size;
    opt.adam.lr = train_.lr;
    opt.seed = globals_.seed;
    opt.resume = adam;
    if (adam) opt.resume->config.lr = train_.lr;
    opt.on_record = [this](const EpochRecord& r) {
      err_ << "epoch " << r.epoch << ' ' << r.split << " bits/dim " << r.bits_per_dim << '\n';
    };
    const TrainResult res = train(*model, data, valid, opt);
    run_dir_ = output_dir_of(train_.checkpoint);
    ensure_dir(run_dir_);
    write_file_atomic(train_.checkpoint, save_model(*model, &res.adam));
    if (!train_.log.empty()) write_text_atomic(train_.log, training_log_csv(res.log));
  }

  // ---- sample
  struct {
    std::string checkpoint, out_dir;
    int count = 1, size = 0;
    double temp = 1.0;
  } sample_;
  void add_sample() {
    auto* s = sub("sample", "Unconditional samples (fully missing mask)", [this] { run_sample(); });
    s->add_option("--checkpoint", sample_.checkpoint)->required();
    s->add_option("--out-dir", sample_.out_dir)->required();
    s->add_option("--count", sample_.count)->check(CLI::PositiveNumber);
    s->add_option("--temp", sample_.temp)->check(CLI::PositiveNumber);
    s->add_option("--size", sample_.size, "Image size (0 = model image_size)")->check(CLI::NonNegativeNumber);
  }
  void run_sample() {
    const auto model = load_checkpoint(sample_.checkpoint);
    const int n = sample_.size > 0 ? sample_.size : model.config().image_size;
    complete_and_write(model, CategoricalRaster(n, n, model.config().K), PixelMask::all_missing(n, n), sample_.count,
                       sample_.temp, false, sample_.out_dir, "sample");
  }

  // ---- inpaint
  struct {
    std::string raster, mask, checkpoint, out_dir;
    int count = 1;
    double temp = 1.0;
    bool flips = false;
  } inpaint_;
  void add_inpaint() {
    auto* s = sub("inpaint", "Complete missing pixels of one raster", [this] { run_inpaint(); });
    s->add_option("--raster", inpaint_.raster)->required();
    s->add_option("--mask", inpaint_.mask)->required();
    s->add_option("--checkpoint", inpaint_.checkpoint)->required();
    s->add_option("--out-dir", inpaint_.out_dir, "Output directory (default: beside the raster)");
    s->add_option("--count", inpaint_.count)->check(CLI::PositiveNumber);
    s->add_option("--temp", inpaint_.temp)->check(CLI::PositiveNumber);
    s->add_flag("--flips", inpaint_.flips, "Random horizontal/vertical flips per completion");
  }
  void run_inpaint() {
    const auto model = load_checkpoint(inpaint_.checkpoint);
    const std::string dir = inpaint_.out_dir.empty() ? output_dir_of(inpaint_.raster).string() : inpaint_.out_dir;
    complete_and_write(model, load_raster(inpaint_.raster), load_mask(inpaint_.mask), inpaint_.count, inpaint_.temp,
                       inpaint_.flips, dir, "completion");
  }

  void complete_and_write(const PixelConstrainedCnn<float>& model, const CategoricalRaster& image,
                          const PixelMask& mask, int count, double temp, bool flips, const std::string& dir,
                          const std::string& stem) {
    const auto start = std::chrono::steady_clock::now();
    SampleRequest req;
    req.model = &model;
    req.image = image;
    req.mask = mask;
    req.temperature = temp;
    req.seed = globals_.seed;
    req.count = count;
    req.orientation = flips ? OrientationPolicy::RandomFlips : OrientationPolicy::Identity;
    req.workers = globals_.workers;
    const auto done = sample(req);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run_dir_ = dir;
    ensure_dir(run_dir_);
    json items = json::array();
    for (int i = 0; i < count; ++i) {
      const std::string name = numbered(stem, i, ".cras");
      save_raster(run_dir_ / name, done[static_cast<std::size_t>(i)]);
      const ScoredImage s = score(model, done[static_cast<std::size_t>(i)]);
      items.push_back({{"file", name}, {"nats", s.nats}, {"bits_per_dim", s.bits_per_dim}});
    }
    const json sidecar{{"seed", globals_.seed},
                       {"temperature", temp},
                       {"count", count},
                       {"clamped_pixels", mask.size() - mask.count_missing()},
                       {"completions", items},
                       {"wall_seconds", wall}};
    write_text_atomic(run_dir_ / (stem + "s.json"), sidecar.dump(2) + "\n");
  }

  // ---- tile-infill
  struct {
    std::string raster, mask, checkpoint, out_dir, classes = "2,3,4,5";
    int count = 25, window = 0, margin = -1;
    double temp = 1.0;
    bool no_flips = false;
  } tile_;
  void add_tile_infill() {
    auto* s = sub("tile-infill", "Sequential windowed infill of large holes", [this] { run_tile(); });
    s->add_option("--raster", tile_.raster)->required();
    s->add_option("--mask", tile_.mask)->required();
    s->add_option("--checkpoint", tile_.checkpoint)->required();
    s->add_option("--out-dir", tile_.out_dir, "Output directory (default: beside the raster)");
    s->add_option("--count", tile_.count)->check(CLI::PositiveNumber);
    s->add_option("--temp", tile_.temp)->check(CLI::PositiveNumber);
    s->add_option("--window", tile_.window, "Window size (0 = model image_size)");
    s->add_option("--margin", tile_.margin, "Context margin (-1 = 27/40 of the window)");
    s->add_option("--classes", tile_.classes, "Class set for the probability map");
    s->add_flag("--no-flips", tile_.no_flips, "Disable random flips per step");
  }
  void run_tile() {
    const auto model = load_checkpoint(tile_.checkpoint);
    const CategoricalRaster raster = load_raster(tile_.raster);
    const PixelMask mask = load_mask(tile_.mask);
    require_same_shape(raster, mask);
    const int window = tile_.window > 0 ? tile_.window : model.config().image_size;
    const int margin = tile_.margin >= 0 ? tile_.margin : static_cast<int>(std::lround(window * 27.0 / 40.0));
    const TilePlan p = plan(mask, window, margin);
    TileRunOptions opt;
    opt.temperature = tile_.temp;
    opt.seed = globals_.seed;
    opt.flips = !tile_.no_flips;
    const auto done = run_many(p, model, raster, mask, opt, tile_.count, globals_.workers);
    run_dir_ = tile_.out_dir.empty() ? output_dir_of(tile_.raster) : fs::path(tile_.out_dir);
    ensure_dir(run_dir_);
    for (int i = 0; i < tile_.count; ++i) save_raster(run_dir_ / numbered("infill", i, ".cras"), done[static_cast<std::size_t>(i)]);
    const auto classes = parse_list<int>(tile_.classes, "class");
    const ProbabilityMap map = probability_map(done, classes);
    std::ostringstream csv;
    csv.precision(10);
    csv << "row,col,probability\n";
    for (int r = 0; r < map.height; ++r)
      for (int c = 0; c < map.width; ++c) csv << r << ',' << c << ',' << map.at(r, c) << '\n';
    write_text_atomic(run_dir_ / "probability_map.csv", csv.str());
    write_file_atomic(run_dir_ / "probability_map.ppm", export_heat_ppm(map.values, map.height, map.width, 0.0, 1.0));
    write_text_atomic(run_dir_ / "tile_plan.json",
                      json{{"window", window}, {"margin", margin}, {"steps", p.steps.size()}}.dump(2) + "\n");
  }

  // ---- stats
  struct {
    std::vector<std::string> rasters;
    std::string out;
  } stats_;
  void add_stats() {
    auto* s = sub("stats", "Landscape summary statistics", [this] { run_stats(); });
    s->add_option("--raster", stats_.rasters, "CRAS file(s)")->required()->delimiter(',');
    s->add_option("--out", stats_.out, "Output CSV (default: standard output)");
  }
  void run_stats() {
    std::ostringstream csv;
    csv.precision(10);
    csv << "id,entropy,adjacency,patch_count,modal_proportion\n";
    for (const auto& path : stats_.rasters) {
      const StatisticVector s = statistics(load_raster(path));
      csv << fs::path(path).stem().string() << ',' << s.entropy << ',' << s.adjacency << ',' << s.patch_count << ','
          << s.modal_proportion << '\n';
    }
    write_csv(stats_.out, csv.str());
  }

  // ---- calibrate
  struct {
    std::string images, mask, checkpoint, out, temps = "0.25,0.5,1.0,1.1,1.25,1.5", percentiles = "50,90,95";
    int samples = 100;
  } cal_;
  void add_calibrate() {
    auto* s = sub("calibrate", "Predictive-interval coverage of summary statistics", [this] { run_calibrate(); });
    s->add_option("--images", cal_.images, "Directory of truth CRAS files (NAME.cmsk beside each overrides --mask)")
        ->required();
    s->add_option("--mask", cal_.mask, "Mask applied to every image (default: bottom half missing)");
    s->add_option("--checkpoint", cal_.checkpoint)->required();
    s->add_option("--samples", cal_.samples, "Completions per image")->check(CLI::Range(20, 1000000));
    s->add_option("--temps", cal_.temps);
    s->add_option("--percentiles", cal_.percentiles);
    s->add_option("--out", cal_.out, "Output CSV (default: standard output)");
  }
  void run_calibrate() {
    const auto model = load_checkpoint(cal_.checkpoint);
    std::vector<CoverageTruth> truths;
    const std::optional<PixelMask> shared_mask =
        cal_.mask.empty() ? std::nullopt : std::optional<PixelMask>(load_mask(cal_.mask));
    for (const auto& p : list_files(cal_.images, ".cras")) {
      CoverageTruth t{load_raster(p), {}};
      fs::path own = p;
      own.replace_extension(".cmsk");
      if (fs::exists(own))
        t.mask = load_mask(own);
      else if (shared_mask)
        t.mask = *shared_mask;
      else
        t.mask = make_training_mask(MaskFamily::BottomHalf, t.image.height(), t.image.width());
      truths.push_back(std::move(t));
    }
    if (truths.empty()) throw FormatError(FormatErrorKind::Io, "calibrate: no images");
    const auto temps = parse_list<double>(cal_.temps, "temperature");
    const auto pcts = parse_list<double>(cal_.percentiles, "percentile");
    const CompletionSampler sampler = [&](std::size_t i, const CoverageTruth& t, int count, double temp) {
      SampleRequest req;
      req.model = &model;
      req.image = t.image;
      req.mask = t.mask;
      req.temperature = temp;
      req.seed = derive_seed(globals_.seed, i) + static_cast<std::uint64_t>(std::lround(temp * 1000.0)) * 1000003ULL;
      req.count = count;
      req.workers = globals_.workers;
      return sample(req);
    };
    const CoverageReport report = coverage(truths, sampler, cal_.samples, pcts, temps);
    write_csv(cal_.out, report.csv());
  }

  // ---- score
  struct {
    std::string checkpoint, images, out;
    std::vector<std::string> rasters;
  } score_;
  void add_score() {
    auto* s = sub("score", "Log-likelihood of complete rasters", [this] { run_score(); });
    s->add_option("--checkpoint", score_.checkpoint)->required();
    s->add_option("--raster", score_.rasters, "CRAS file(s)")->delimiter(',');
    s->add_option("--images", score_.images, "Directory of CRAS files");
    s->add_option("--out", score_.out, "Output CSV (default: standard output)");
  }
  void run_score() {
    const auto model = load_checkpoint(score_.checkpoint);
    std::vector<fs::path> paths(score_.rasters.begin(), score_.rasters.end());
    if (!score_.images.empty())
      for (auto& p : list_files(score_.images, ".cras")) paths.push_back(p);
    if (paths.empty()) throw UsageError("score: give --raster or --images");
    std::ostringstream csv;
    csv.precision(12);
    csv << "id,nats,bits_per_dim\n";
    for (const auto& p : paths) {
      const ScoredImage s = score(model, load_raster(p));
      csv << p.stem().string() << ',' << s.nats << ',' << s.bits_per_dim << '\n';
    }
    write_csv(score_.out, csv.str());
  }

  // ---- likelihood-map
  struct {
    std::string checkpoint, data, points, out_dir;
    double length_scale = 0.0, step = 0.0;
  } lmap_;
  void add_likelihood_map() {
    auto* s = sub("likelihood-map", "Interpolated surface of per-window log-likelihood", [this] { run_lmap(); });
    s->add_option("--checkpoint", lmap_.checkpoint, "Model used to score the windows of --data");
    s->add_option("--data", lmap_.data, "Window directory with manifest.json");
    s->add_option("--points", lmap_.points, "CSV of x,y,value instead of scoring");
    s->add_option("--out-dir", lmap_.out_dir)->required();
    s->add_option("--length-scale", lmap_.length_scale, "Gaussian kernel length scale (0 = 2 x window)");
    s->add_option("--step", lmap_.step, "Grid spacing (0 = window / 2)");
  }
  void run_lmap() {
    std::vector<RbfPoint> pts;
    double window = 1.0;
    if (!lmap_.points.empty()) {
      std::istringstream in(std::string(reinterpret_cast<const char*>(read_file(lmap_.points).data()),
                                        read_file(lmap_.points).size()));
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto v = parse_list<double>(line, "point");
        if (v.size() != 3) throw FormatError(FormatErrorKind::Other, "points CSV rows need x,y,value");
        pts.push_back({v[0], v[1], v[2]});
      }
    } else {
      if (lmap_.checkpoint.empty() || lmap_.data.empty())
        throw UsageError("likelihood-map: give --points or both --checkpoint and --data");
      const auto model = load_checkpoint(lmap_.checkpoint);
      const auto text = read_file(fs::path(lmap_.data) / "manifest.json");
      const DatasetManifest manifest = json::parse(text.begin(), text.end()).get<DatasetManifest>();
      const auto files = list_files(lmap_.data, ".cras");
      if (files.size() != manifest.entries.size())
        throw FormatError(FormatErrorKind::DimensionMismatch, "manifest and window count differ");
      window = manifest.window_size;
      for (std::size_t i = 0; i < files.size(); ++i) {
        const auto& e = manifest.entries[i];
        const ScoredImage s = score(model, load_raster(files[i]));
        pts.push_back({e.column_offset + window / 2.0, e.row_offset + window / 2.0, s.nats / (window * window)});
      }
    }
    if (pts.empty()) throw FormatError(FormatErrorKind::Other, "likelihood-map: no points");
    double x0 = pts[0].x, x1 = x0, y0 = pts[0].y, y1 = y0;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    const double step = lmap_.step > 0 ? lmap_.step : std::max(window / 2.0, 1.0);
    const double ls = lmap_.length_scale > 0 ? lmap_.length_scale : std::max(2.0 * window, 1.0);
    GridSpec g{x0, y0, step, step, static_cast<int>((x1 - x0) / step) + 1, static_cast<int>((y1 - y0) / step) + 1};
    const auto values = rbf_interpolate(pts, g, ls);
    run_dir_ = lmap_.out_dir;
    ensure_dir(run_dir_);
    std::ostringstream csv;
    csv.precision(10);
    csv << "x,y,value\n";
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.columns; ++c)
        csv << g.x0 + c * g.dx << ',' << g.y0 + r * g.dy << ','
            << values[static_cast<std::size_t>(r) * static_cast<std::size_t>(g.columns) + static_cast<std::size_t>(c)]
            << '\n';
    write_text_atomic(run_dir_ / "likelihood_map.csv", csv.str());
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    write_file_atomic(run_dir_ / "likelihood_map.ppm",
                      export_heat_ppm(values, g.rows, g.columns, *lo, *hi > *lo ? *hi : *lo + 1.0));
  }

  // ---- sccar-fit
  struct {
    std::string raster, mask, out, diagnostics;
    int classes = 0, chains = 4, tune = 2000, draws = 2000, leapfrog = 32;
    double target_accept = 0.9;
  } fit_;
  void add_sccar_fit() {
    auto* s = sub("sccar-fit", "HMC fit of the spatial categorical CAR model", [this] { run_fit(); });
    s->add_option("--raster", fit_.raster)->required();
    s->add_option("--mask", fit_.mask, "Observed-pixel mask (default: all observed)");
    s->add_option("--classes", fit_.classes, "K (0 = raster K)");
    s->add_option("--chains", fit_.chains)->check(CLI::PositiveNumber);
    s->add_option("--tune", fit_.tune)->check(CLI::NonNegativeNumber);
    s->add_option("--draws", fit_.draws)->check(CLI::PositiveNumber);
    s->add_option("--leapfrog", fit_.leapfrog)->check(CLI::PositiveNumber);
    s->add_option("--target-accept", fit_.target_accept)->check(CLI::Range(0.01, 0.99));
    s->add_option("--out", fit_.out, "Output SCCD draws")->required();
    s->add_option("--diagnostics", fit_.diagnostics, "Output diagnostics CSV");
  }
  void run_fit() {
    const CategoricalRaster raster = load_raster(fit_.raster);
    const PixelMask mask =
        fit_.mask.empty() ? PixelMask::all_observed(raster.height(), raster.width()) : load_mask(fit_.mask);
    HmcOptions opt;
    opt.chains = fit_.chains;
    opt.tune = fit_.tune;
    opt.draws = fit_.draws;
    opt.leapfrog_steps = fit_.leapfrog;
    opt.target_accept = fit_.target_accept;
    opt.seed = globals_.seed;
    opt.workers = globals_.workers;
    const SccarFit fit = hmc_fit(raster, mask, fit_.classes > 0 ? fit_.classes : raster.num_classes(), opt);
    run_dir_ = output_dir_of(fit_.out);
    ensure_dir(run_dir_);
    write_file_atomic(fit_.out, encode_sccd(fit.draws));
    if (!fit_.diagnostics.empty()) write_text_atomic(fit_.diagnostics, diagnostics_csv(fit.diagnostics));
    double worst = 0.0;
    for (const auto& d : fit.diagnostics)
      if (std::isnan(d.rhat))
        err_ << "warning: zero-variance draws for " << d.name << '\n';
      else
        worst = std::max(worst, d.rhat);
    err_ << "max R-hat " << worst << ", divergences " << fit.divergences << '\n';
  }

  // ---- sccar-inpaint
  struct {
    std::string draws, raster, mask, out_dir;
    int count = 1;
  } sinp_;
  void add_sccar_inpaint() {
    auto* s = sub("sccar-inpaint", "Posterior-predictive completions from SCCAR draws", [this] { run_sinp(); });
    s->add_option("--draws", sinp_.draws)->required();
    s->add_option("--raster", sinp_.raster)->required();
    s->add_option("--mask", sinp_.mask)->required();
    s->add_option("--out-dir", sinp_.out_dir)->required();
    s->add_option("--count", sinp_.count)->check(CLI::PositiveNumber);
  }
  void run_sinp() {
    const SccarDraws d = decode_sccd(read_file(sinp_.draws));
    const CategoricalRaster raster = load_raster(sinp_.raster);
    const PixelMask mask = load_mask(sinp_.mask);
    if (raster.height() != d.height || raster.width() != d.width)
      throw FormatError(FormatErrorKind::DimensionMismatch, "draws were fitted on a different grid");
    const auto done = predictive_inpaint(d.params(), raster, mask, sinp_.count, globals_.seed);
    run_dir_ = sinp_.out_dir;
    ensure_dir(run_dir_);
    for (int i = 0; i < sinp_.count; ++i) save_raster(run_dir_ / numbered("sccar", i, ".cras"), done[static_cast<std::size_t>(i)]);
  }

  // ---- export-ppm
  struct {
    std::string raster, out;
  } ppm_;
  void add_export_ppm() {
    auto* s = sub("export-ppm", "Render a raster with its class palette", [this] { run_ppm(); });
    s->add_option("--raster", ppm_.raster)->required();
    s->add_option("--out", ppm_.out)->required();
  }
  void run_ppm() {
    const CategoricalRaster r = load_raster(ppm_.raster);
    run_dir_ = output_dir_of(ppm_.out);
    ensure_dir(run_dir_);
    write_file_atomic(ppm_.out, export_ppm(r, make_palette(r.num_classes())));
  }

  std::ostream& out_;
  std::ostream& err_;
  CLI::App app_;
  Globals globals_;
  std::map<std::string, std::function<void()>> handlers_;
  fs::path run_dir_ = ".";
};

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  return cli.run(args);
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace lulc
