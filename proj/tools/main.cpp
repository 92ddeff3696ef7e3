// chrono-shield: command-line front end for the shadow attack / time-travel
// defense experiments.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/config.hpp"
#include "chrono_shield/error.hpp"
#include "chrono_shield/experiment.hpp"
#include "chrono_shield/fixture_server.hpp"
#include "chrono_shield/history_client.hpp"
#include "chrono_shield/image_io.hpp"
#include "chrono_shield/mask.hpp"
#include "chrono_shield/report.hpp"
#include "chrono_shield/shadow_attack.hpp"
#include "chrono_shield/synth.hpp"
#include "chrono_shield/time_travel.hpp"

namespace fs = std::filesystem;
using namespace chrono_shield;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  fs::path out = "chrono-shield-out";
  bool quiet = false;
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig{} : load_config(g.config_path);
  if (g.seed) c.apply_seed(*g.seed);
  return c;
}

void log(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << '\n';
}

ModelWeights read_model(const fs::path& path) {
  const auto bytes = read_file(path);
  return load_weights(bytes);
}

std::string labelled(const Prediction& p) {
  return std::string(class_name(p.label)) + " (" + format_percent(p.confidence) + "%)";
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

FixtureServer* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shadow attacks on traffic-sign classifiers and the time-travel majority-vote defense"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "master seed (overrides the config file)");
  app.add_option("--config", g.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory");
  app.add_flag("-q,--quiet", g.quiet, "suppress progress on stderr");

  // synth
  auto* synth = app.add_subcommand("synth", "render the synthetic 16-class corpus to OUT/dataset");
  std::optional<int> train_per_class, test_per_class, side;
  synth->add_option("--train-per-class", train_per_class);
  synth->add_option("--test-per-class", test_per_class);
  synth->add_option("--side", side, "image side in pixels");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the classifier, writing OUT/model.csw");
  std::string data_dir;
  std::optional<int> epochs;
  bool adversarial = false;
  train_cmd->add_option("--data", data_dir, "dataset directory from `synth` (rendered on the fly if omitted)");
  train_cmd->add_option("--epochs", epochs);
  train_cmd->add_flag("--adversarial", adversarial, "train the shadow-augmented baseline instead");

  // mask
  auto* mask_cmd = app.add_subcommand("mask", "generate the sign-face mask of an image");
  std::string mask_in;
  std::optional<double> low, high, sigma, min_area;
  mask_cmd->add_option("input", mask_in, "PNG or PPM image")->required()->check(CLI::ExistingFile);
  mask_cmd->add_option("--low", low, "Canny low threshold");
  mask_cmd->add_option("--high", high, "Canny high threshold");
  mask_cmd->add_option("--sigma", sigma, "Gaussian blur sigma");
  mask_cmd->add_option("--min-area", min_area, "minimum contour area as a fraction of the image");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "PSO shadow attack against a trained model");
  std::string image_path, mask_path, model_path;
  std::optional<int> label, swarm, iters, vertices;
  std::optional<double> darkening;
  std::string fitness;
  attack_cmd->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  attack_cmd->add_option("--mask", mask_path, "mask image; generated when omitted")->check(CLI::ExistingFile);
  attack_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  attack_cmd->add_option("--label", label, "true class; defaults to the clean prediction");
  attack_cmd->add_option("--swarm", swarm);
  attack_cmd->add_option("--iters", iters);
  attack_cmd->add_option("--darkening", darkening);
  attack_cmd->add_option("--k", vertices, "polygon vertex count");
  attack_cmd->add_option("--fitness", fitness, "probability or margin");

  // defend
  auto* defend_cmd = app.add_subcommand("defend", "classify an image against its historical captures");
  std::string history_source;
  std::optional<std::size_t> min_history;
  double lat = 0, lon = 0, heading = 0;
  std::string date;
  std::size_t max_records = 3;
  defend_cmd->add_option("--image", image_path)->required()->check(CLI::ExistingFile);
  defend_cmd->add_option("--history", history_source, "archive directory or http(s) endpoint")->required();
  defend_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  defend_cmd->add_option("--min-history", min_history);
  defend_cmd->add_option("--lat", lat)->required();
  defend_cmd->add_option("--lon", lon)->required();
  defend_cmd->add_option("--heading", heading)->required();
  defend_cmd->add_option("--date", date, "capture date of the current image; history must predate it");
  defend_cmd->add_option("--max", max_records, "historical records to request");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "synth -> train -> attack -> defend -> report");
  std::string format = "text";
  sweep->add_option("--format", format, "stdout format: text, csv or json");

  // serve-fixture
  auto* serve = app.add_subcommand("serve-fixture", "serve an archive directory over the history protocol");
  std::string root, host = "127.0.0.1";
  int port = 8765;
  serve->add_option("--root", root)->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", host);
  serve->add_option("--port", port);

  auto* config_cmd = app.add_subcommand("config", "print every config key with its current value");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = resolve_config(g);

    if (*config_cmd) {
      std::cout << dump_config(cfg);
      return 0;
    }

    if (*synth) {
      if (train_per_class) cfg.synth.train_per_class = *train_per_class;
      if (test_per_class) cfg.synth.test_per_class = *test_per_class;
      if (side) cfg.synth.image_side = *side;
      const auto set = synth_dataset(cfg.synth);
      save_dataset(set, g.out / "dataset");
      std::cout << set.items.size() << " images written to " << (g.out / "dataset").string() << '\n';
      return 0;
    }

    if (*train_cmd) {
      if (epochs) cfg.train.epochs = *epochs;
      const LabeledImageSet set = data_dir.empty() ? synth_dataset(cfg.synth) : load_dataset(data_dir);
      const auto train_set = set.split(Split::train);
      const auto test_set = set.split(Split::test);
      auto on_epoch = [&](int e, double loss) {
        log(g, "epoch " + std::to_string(e) + "/" + std::to_string(cfg.train.epochs) + " loss " +
                   std::to_string(loss));
      };
      const TrainResult r =
          adversarial ? train_adversarial_baseline(train_set, cfg, on_epoch) : train(train_set, cfg.train, on_epoch);
      fs::create_directories(g.out);
      const fs::path model_out = g.out / (adversarial ? "baseline.csw" : "model.csw");
      write_file_atomic(model_out, save_weights(r.weights));
      std::cout << "train accuracy " << format_percent(accuracy(r.weights, train_set)) << "%";
      if (!test_set.empty()) std::cout << ", test accuracy " << format_percent(accuracy(r.weights, test_set)) << "%";
      std::cout << "\nweights written to " << model_out.string() << '\n';
      return 0;
    }

    if (*mask_cmd) {
      if (low) cfg.mask.canny_low = *low;
      if (high) cfg.mask.canny_high = *high;
      if (sigma) cfg.mask.sigma = *sigma;
      if (min_area) cfg.mask.min_area_fraction = *min_area;
      const BinaryMask m = generate_mask(load_image(mask_in), cfg.mask);
      fs::create_directories(g.out);
      const fs::path out = g.out / (fs::path(mask_in).stem().string() + "-mask.ppm");
      save_image(mask_to_image(m), out);
      const auto box = m.bounding_box();
      std::cout << "mask area " << m.count() << " px, box (" << box->x0 << "," << box->y0 << ")-(" << box->x1
                << "," << box->y1 << "), written to " << out.string() << '\n';
      return 0;
    }

    if (*attack_cmd) {
      if (swarm) cfg.attack.pso.swarm_size = *swarm;
      if (iters) cfg.attack.pso.iterations = *iters;
      if (darkening) cfg.attack.darkening = *darkening;
      if (vertices) cfg.attack.vertices = *vertices;
      if (fitness == "margin") cfg.attack.fitness = AttackFitness::margin;
      else if (fitness == "probability") cfg.attack.fitness = AttackFitness::true_class_probability;
      else if (!fitness.empty()) raise(ErrorCode::InvalidConfig, "fitness must be probability or margin");

      const RasterImage img = to_rgb(load_image(image_path));
      const ModelWeights model = read_model(model_path);
      const ScoringFunction victim = make_victim(model);
      BinaryMask m;
      if (!mask_path.empty()) {
        m = image_to_mask(load_image(mask_path));
      } else {
        try {
          m = generate_mask(img, cfg.mask);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoContourFound) throw;
          log(g, "no contour found; attacking with a full-frame mask");
          m = BinaryMask(img.width(), img.height(), true);
        }
      }
      const int true_label = label ? *label : victim(img).label;
      const AttackResult r = run_attack(img, m, victim, true_label, cfg.attack);
      fs::create_directories(g.out);
      const fs::path out = g.out / (fs::path(image_path).stem().string() + "-adv.png");
      save_image(r.adversarial_image, out);

      nlohmann::ordered_json vs = nlohmann::ordered_json::array();
      for (const Vertex& v : r.shadow.vertices) vs.push_back({v.x, v.y});
      const nlohmann::ordered_json j = {
          {"image", image_path},
          {"original_label", r.original_prediction.label},
          {"original_confidence", format_percent(r.original_prediction.confidence)},
          {"predicted_label", r.adversarial_prediction.label},
          {"confidence", format_percent(r.adversarial_prediction.confidence)},
          {"success", r.success},
          {"iterations", r.iterations_used},
          {"queries", r.queries},
          {"darkening", r.shadow.darkening},
          {"vertices", vs},
      };
      write_text(g.out / (fs::path(image_path).stem().string() + "-attack.json"), j.dump(2) + "\n");
      std::cout << "original " << labelled(r.original_prediction) << " -> adversarial "
                << labelled(r.adversarial_prediction) << ", attack " << (r.success ? "succeeded" : "failed")
                << " after " << r.iterations_used << " iterations (" << r.queries << " queries)\n"
                << "adversarial image written to " << out.string() << '\n';
      return 0;
    }

    if (*defend_cmd) {
      if (min_history) cfg.vote.min_history = *min_history;
      HistoryQuery q;
      q.location = {lat, lon};
      q.heading = heading;
      q.max_records = max_records;
      if (!date.empty()) q.before = Date::parse(date);
      RemoteOptions ro;
      ro.cache_dir = g.out / "cache";
      ro.policy = cfg.match;
      const HistoryResult h = query_history(history_source, q, ro);
      for (const auto& n : h.notes) log(g, n);
      const ModelWeights model = read_model(model_path);
      const Verdict v = defend(to_rgb(load_image(image_path)), h.records, model, cfg.vote);

      std::printf("%-40s %-10s %-18s %s\n", "image", "date", "predicted label", "confidence");
      for (const Vote& vote : v.votes) {
        std::printf("%-40s %-10s %-18s %s%%\n", vote.source.c_str(),
                    vote.capture_date ? vote.capture_date->month_year().c_str() : "current",
                    std::string(class_name(vote.prediction.label)).c_str(),
                    format_percent(vote.prediction.confidence).c_str());
      }
      std::cout << "voted label: " << class_name(v.voted_label) << " (" << format_percent(v.voted_confidence)
                << "%), suspected attack: " << (v.suspected_attack ? "yes" : "no");
      for (VerdictWarning w : v.warnings) std::cout << ", warning: " << to_string(w);
      std::cout << (h.from_cache ? " [history from cache]" : "") << '\n';
      return 0;
    }

    if (*sweep) {
      const ReportFormat fmt = parse_report_format(format);
      const SweepResult r = run_sweep(cfg, g.out, [&](const std::string& s) { log(g, s); });
      std::cout << emit_report(r.report, fmt);
      char timing[160];
      std::snprintf(timing, sizeof timing, "clean test accuracy %s%%, train %.1fs, baseline %.1fs, total %.1fs",
                    format_percent(r.clean_test_accuracy).c_str(), r.train_seconds, r.baseline_train_seconds,
                    r.sweep_seconds);
      log(g, timing);
      return 0;
    }

    if (*serve) {
      FixtureServer server(root, cfg.match);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << root << " on http://" << host << ":" << port << '\n';
      server.run(host, port);
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
