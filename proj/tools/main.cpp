// argem: train / eval / export for adversarially regularized graph embeddings.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "argem/checkpoint.hpp"
#include "argem/cluster.hpp"
#include "argem/error.hpp"
#include "argem/graph.hpp"
#include "argem/linkpred.hpp"
#include "argem/model.hpp"
#include "argem/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct DatasetOpts {
  std::string dataset;  // known name or "content,cites" pair
  std::string content_path;
  std::string cites_path;
};

struct TrainOpts {
  std::string model = "arga";
  std::string prior = "gaussian";
  int epochs = 200;
  int disc_steps = 1;
  int disc_batch = 0;
  double lr = 1e-3;
  double disc_lr = 1e-3;
  int hidden = 32;
  int embed = 16;
  int dec_hidden = 32;
  double adv_weight = 1.0;
  double val_frac = 0.05;
  double test_frac = 0.10;
  std::uint64_t seed = 1;
};

std::string data_dir() {
  const char* env = std::getenv("ARGEM_DATA_DIR");
  return env ? env : ".";
}

void resolve_dataset(DatasetOpts& opts) {
  if (!opts.content_path.empty() && !opts.cites_path.empty()) return;
  if (opts.dataset.empty()) {
    throw argem::ContractError(
        "no dataset: pass --dataset NAME or --content/--cites paths");
  }
  const auto comma = opts.dataset.find(',');
  if (comma != std::string::npos) {
    opts.content_path = opts.dataset.substr(0, comma);
    opts.cites_path = opts.dataset.substr(comma + 1);
    return;
  }
  const std::string dir = data_dir();
  const std::vector<std::string> stems = {
      dir + "/" + opts.dataset + "/" + opts.dataset,
      dir + "/" + opts.dataset,
  };
  for (const auto& stem : stems) {
    if (fs::exists(stem + ".content") && fs::exists(stem + ".cites")) {
      opts.content_path = stem + ".content";
      opts.cites_path = stem + ".cites";
      return;
    }
  }
  throw argem::ContractError("dataset '" + opts.dataset + "' not found under " +
                             dir + " (expected <name>.content and <name>.cites)");
}

argem::TrainConfig make_config(const TrainOpts& t) {
  argem::TrainConfig cfg;
  cfg.variant = argem::parse_variant(t.model);
  cfg.prior = argem::parse_prior(t.prior);
  cfg.epochs = t.epochs;
  cfg.disc_steps = t.disc_steps;
  cfg.disc_batch = t.disc_batch;
  cfg.lr = t.lr;
  cfg.disc_lr = t.disc_lr;
  cfg.hidden = t.hidden;
  cfg.embed = t.embed;
  cfg.dec_hidden = t.dec_hidden;
  cfg.adv_weight = t.adv_weight;
  cfg.seed = t.seed;
  cfg.validate();
  return cfg;
}

void add_dataset_flags(CLI::App* cmd, DatasetOpts& d) {
  cmd->add_option("--dataset", d.dataset,
                  "dataset name under $ARGEM_DATA_DIR, or 'content.path,cites.path'");
  cmd->add_option("--content", d.content_path, "path to the .content file");
  cmd->add_option("--cites", d.cites_path, "path to the .cites file");
}

void add_train_flags(CLI::App* cmd, TrainOpts& t) {
  cmd->add_option("--model", t.model,
                  "one of arga, arvga, arga_gd, arvga_gd, arga_ax, arvga_ax")
      ->check(CLI::IsMember({"arga", "arvga", "arga_gd", "arvga_gd", "arga_ax",
                             "arvga_ax"}));
  cmd->add_option("--prior", t.prior, "latent prior")
      ->check(CLI::IsMember({"gaussian", "uniform"}));
  cmd->add_option("--epochs", t.epochs, "training iterations T");
  cmd->add_option("--disc-steps", t.disc_steps, "discriminator steps K per epoch");
  cmd->add_option("--disc-batch", t.disc_batch,
                  "rows per discriminator step (0 = all nodes)");
  cmd->add_option("--lr", t.lr, "autoencoder learning rate");
  cmd->add_option("--disc-lr", t.disc_lr, "discriminator learning rate");
  cmd->add_option("--hidden", t.hidden, "encoder hidden width");
  cmd->add_option("--embed", t.embed, "embedding width");
  cmd->add_option("--dec-hidden", t.dec_hidden, "GCN decoder hidden width");
  cmd->add_option("--adv-weight", t.adv_weight, "weight of the generator term");
  cmd->add_option("--val-frac", t.val_frac, "validation edge fraction");
  cmd->add_option("--test-frac", t.test_frac, "test edge fraction");
  cmd->add_option("--seed", t.seed, "master seed");
}

std::map<std::string, std::string> config_echo(const TrainOpts& t,
                                               const DatasetOpts& d) {
  std::map<std::string, std::string> m;
  m["model"] = t.model;
  m["prior"] = t.prior;
  m["epochs"] = std::to_string(t.epochs);
  m["disc_steps"] = std::to_string(t.disc_steps);
  m["disc_batch"] = std::to_string(t.disc_batch);
  std::ostringstream lr;
  lr.precision(17);
  lr << t.lr;
  m["lr"] = lr.str();
  std::ostringstream dlr;
  dlr.precision(17);
  dlr << t.disc_lr;
  m["disc_lr"] = dlr.str();
  m["hidden"] = std::to_string(t.hidden);
  m["embed"] = std::to_string(t.embed);
  m["dec_hidden"] = std::to_string(t.dec_hidden);
  std::ostringstream aw;
  aw.precision(17);
  aw << t.adv_weight;
  m["adv_weight"] = aw.str();
  std::ostringstream vf;
  vf.precision(17);
  vf << t.val_frac;
  m["val_frac"] = vf.str();
  std::ostringstream tf;
  tf.precision(17);
  tf << t.test_frac;
  m["test_frac"] = tf.str();
  m["seed"] = std::to_string(t.seed);
  m["content"] = d.content_path;
  m["cites"] = d.cites_path;
  return m;
}

void write_report(const std::string& out_dir, const std::string& name,
                  const std::vector<std::pair<std::string, std::string>>& rows) {
  if (out_dir.empty()) return;
  fs::create_directories(out_dir);
  std::ofstream txt(out_dir + "/" + name + ".txt");
  json j;
  for (const auto& [k, v] : rows) {
    txt << k << "=" << v << "\n";
    j[k] = v;
  }
  std::ofstream js(out_dir + "/" + name + ".json");
  js << j.dump(2) << "\n";
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct LinkMetrics {
  double auc = 0.0, ap = 0.0;
};

LinkMetrics link_metrics(const argem::DenseMat& z, const argem::EdgeSplit& split) {
  auto pos = argem::score_edges(z, split.test_pos);
  auto neg = argem::score_edges(z, split.test_neg);
  LinkMetrics m;
  m.auc = argem::auc(pos, neg);
  std::vector<double> scores = pos;
  scores.insert(scores.end(), neg.begin(), neg.end());
  std::vector<int> labels(pos.size(), 1);
  labels.insert(labels.end(), neg.size(), 0);
  m.ap = argem::average_precision(scores, labels);
  return m;
}

struct ClusterMetrics {
  double acc = 0.0, nmi = 0.0, f1 = 0.0, precision = 0.0, ari = 0.0;
};

ClusterMetrics cluster_metrics(const argem::DenseMat& z, const argem::Graph& g,
                               int k, std::uint64_t seed, int restarts) {
  if (!g.has_labels()) {
    throw argem::ContractError("cluster task needs ground-truth labels");
  }
  auto assign = argem::kmeans(z, k, seed, 300, restarts);
  ClusterMetrics m;
  m.acc = argem::clustering_accuracy(assign.labels, g.labels);
  m.nmi = argem::nmi(assign.labels, g.labels);
  auto [f1, prec] = argem::f1_and_precision(assign.labels, g.labels);
  m.f1 = f1;
  m.precision = prec;
  m.ari = argem::ari(assign.labels, g.labels);
  return m;
}

argem::DenseMat embedding_from_weights(const argem::ModelWeights& w,
                                       const argem::Propagator& p,
                                       const argem::Graph& g) {
  argem::Rng unused(0);
  return argem::encode(p, g.features, w.enc, /*variational=*/false, unused).mu;
}

int cmd_train(const DatasetOpts& dataset_in, const TrainOpts& topts,
              const std::string& out_dir) {
  DatasetOpts dataset = dataset_in;
  resolve_dataset(dataset);
  argem::LoadReport load_report;
  argem::Graph g =
      argem::load_citation_dataset(dataset.content_path, dataset.cites_path, &load_report);
  if (load_report.skipped_unknown_id > 0) {
    std::cerr << "warning: skipped " << load_report.skipped_unknown_id
              << " citation lines with unknown ids\n";
  }
  argem::EdgeSplit split =
      argem::split_edges(g, topts.val_frac, topts.test_frac, topts.seed);
  argem::TrainConfig cfg = make_config(topts);

  const auto t0 = std::chrono::steady_clock::now();
  argem::TrainedModel model = argem::train(g, split, cfg);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  fs::create_directories(out_dir);
  argem::Checkpoint ckpt;
  ckpt.weights = model.weights;
  ckpt.meta = config_echo(topts, dataset);
  argem::save_checkpoint(out_dir + "/checkpoint.argem", ckpt);
  argem::save_embedding_tsv(out_dir + "/embedding.tsv", model.embedding, g.node_ids);

  {
    std::ofstream losses(out_dir + "/losses.tsv");
    losses << "epoch\trecon\tkl\tdisc\tgen\n";
    for (std::size_t e = 0; e < model.history.recon.size(); ++e) {
      losses << (e + 1) << '\t' << fmt_double(model.history.recon[e]) << '\t'
             << fmt_double(model.history.kl[e]) << '\t'
             << fmt_double(model.history.disc[e]) << '\t'
             << fmt_double(model.history.gen[e]) << '\n';
    }
  }

  std::vector<std::pair<std::string, std::string>> rows(ckpt.meta.begin(),
                                                        ckpt.meta.end());
  rows.emplace_back("nodes", std::to_string(g.n));
  rows.emplace_back("features", std::to_string(g.m));
  rows.emplace_back("edges", std::to_string(g.edges.size()));
  rows.emplace_back("duration_sec", fmt_double(seconds));
  rows.emplace_back("final_recon", fmt_double(model.history.recon.back()));
  rows.emplace_back("final_kl", fmt_double(model.history.kl.back()));
  rows.emplace_back("final_disc", fmt_double(model.history.disc.back()));
  rows.emplace_back("final_gen", fmt_double(model.history.gen.back()));
  write_report(out_dir, "run", rows);

  std::cout << "checkpoint=" << out_dir << "/checkpoint.argem\n"
            << "embedding=" << out_dir << "/embedding.tsv\n"
            << "epochs=" << cfg.epochs << "\n"
            << "duration_sec=" << fmt_double(seconds) << "\n";
  return 0;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1)) /
         std::sqrt(static_cast<double>(v.size()));
}

int cmd_eval(const DatasetOpts& dataset_in, const TrainOpts& topts,
             const std::string& task, const std::string& checkpoint_path,
             const std::string& embedding_path, int repeat, int jobs, int clusters,
             int kmeans_restarts, const std::string& out_dir) {
  if (task != "link" && task != "cluster") {
    throw argem::ContractError("--task must be link or cluster");
  }

  std::vector<std::pair<std::string, std::string>> rows;
  auto emit = [&](const std::string& k, double v) {
    rows.emplace_back(k, fmt_double(v));
    std::cout << k << "=" << fmt_double(v) << "\n";
  };

  if (repeat > 0) {
    // Rerun train+eval across derived seeds; merge deterministically by index.
    DatasetOpts dataset = dataset_in;
    resolve_dataset(dataset);
    argem::Graph g =
        argem::load_citation_dataset(dataset.content_path, dataset.cites_path);
    const int k = clusters > 0 ? clusters : g.num_classes();

    struct RunResult {
      std::map<std::string, double> metrics;
    };
    auto one_run = [&](int run_index) {
      TrainOpts run_opts = topts;
      run_opts.seed = topts.seed + static_cast<std::uint64_t>(run_index);
      argem::EdgeSplit split =
          argem::split_edges(g, run_opts.val_frac, run_opts.test_frac, run_opts.seed);
      argem::TrainedModel model = argem::train(g, split, make_config(run_opts));
      RunResult r;
      if (task == "link") {
        LinkMetrics m = link_metrics(model.embedding, split);
        r.metrics = {{"auc", m.auc}, {"ap", m.ap}};
      } else {
        ClusterMetrics m =
            cluster_metrics(model.embedding, g, k, run_opts.seed, kmeans_restarts);
        r.metrics = {{"acc", m.acc}, {"nmi", m.nmi},         {"f1", m.f1},
                     {"precision", m.precision}, {"ari", m.ari}};
      }
      return r;
    };

    std::vector<RunResult> results(repeat);
    const int workers = std::max(1, jobs);
    for (int base = 0; base < repeat; base += workers) {
      std::vector<std::future<RunResult>> batch;
      for (int r = base; r < std::min(repeat, base + workers); ++r) {
        batch.push_back(std::async(std::launch::async, one_run, r));
      }
      for (int r = base; r < std::min(repeat, base + workers); ++r) {
        results[r] = batch[r - base].get();
      }
    }

    std::map<std::string, std::vector<double>> series;
    for (int r = 0; r < repeat; ++r) {
      std::ostringstream line;
      line << "run=" << r << " seed=" << (topts.seed + static_cast<std::uint64_t>(r));
      for (const auto& [k2, v] : results[r].metrics) {
        line << " " << k2 << "=" << fmt_double(v);
        series[k2].push_back(v);
      }
      std::cout << line.str() << "\n";
      rows.emplace_back("run" + std::to_string(r), line.str());
    }
    for (const auto& [k2, vals] : series) {
      emit(k2 + "_mean", mean_of(vals));
      emit(k2 + "_stderr", stderr_of(vals));
    }
    write_report(out_dir, "report", rows);
    return 0;
  }

  // Single evaluation of an existing checkpoint or embedding file.
  argem::DenseMat z;
  DatasetOpts dataset = dataset_in;
  std::optional<argem::Checkpoint> ckpt;
  TrainOpts eval_opts = topts;
  if (!checkpoint_path.empty()) {
    ckpt = argem::load_checkpoint(checkpoint_path);
    // dataset identity and split parameters come from the config echo unless
    // overridden on the command line
    if (dataset.content_path.empty() && dataset.dataset.empty()) {
      dataset.content_path = ckpt->meta.at("content");
      dataset.cites_path = ckpt->meta.at("cites");
    }
    eval_opts.val_frac = std::stod(ckpt->meta.at("val_frac"));
    eval_opts.test_frac = std::stod(ckpt->meta.at("test_frac"));
    eval_opts.seed = std::stoull(ckpt->meta.at("seed"));
  } else if (embedding_path.empty()) {
    throw argem::ContractError("eval needs --checkpoint, --embedding, or --repeat");
  }
  resolve_dataset(dataset);
  argem::Graph g =
      argem::load_citation_dataset(dataset.content_path, dataset.cites_path);

  if (ckpt) {
    argem::Propagator prop;
    if (task == "link") {
      argem::EdgeSplit split =
          argem::split_edges(g, eval_opts.val_frac, eval_opts.test_frac, eval_opts.seed);
      prop = argem::build_propagator(g.n, split.train_edges);
      z = embedding_from_weights(ckpt->weights, prop, g);
      LinkMetrics m = link_metrics(z, split);
      emit("auc", m.auc);
      emit("ap", m.ap);
      write_report(out_dir, "report", rows);
      return 0;
    }
    argem::EdgeSplit split =
        argem::split_edges(g, eval_opts.val_frac, eval_opts.test_frac, eval_opts.seed);
    prop = argem::build_propagator(g.n, split.train_edges);
    z = embedding_from_weights(ckpt->weights, prop, g);
  } else {
    z = argem::load_embedding_tsv(embedding_path);
    if (z.rows != g.n) {
      throw argem::ContractError("embedding rows do not match the dataset");
    }
  }

  const int k = clusters > 0 ? clusters : g.num_classes();
  ClusterMetrics m = cluster_metrics(z, g, k, eval_opts.seed, kmeans_restarts);
  emit("acc", m.acc);
  emit("nmi", m.nmi);
  emit("f1", m.f1);
  emit("precision", m.precision);
  emit("ari", m.ari);
  write_report(out_dir, "report", rows);
  return 0;
}

int cmd_export(const DatasetOpts& dataset_in, const std::string& checkpoint_path,
               const std::string& out_file) {
  argem::Checkpoint ckpt = argem::load_checkpoint(checkpoint_path);
  DatasetOpts dataset = dataset_in;
  if (dataset.content_path.empty() && dataset.dataset.empty()) {
    dataset.content_path = ckpt.meta.at("content");
    dataset.cites_path = ckpt.meta.at("cites");
  }
  resolve_dataset(dataset);
  argem::Graph g =
      argem::load_citation_dataset(dataset.content_path, dataset.cites_path);
  const double val_frac = std::stod(ckpt.meta.at("val_frac"));
  const double test_frac = std::stod(ckpt.meta.at("test_frac"));
  const std::uint64_t seed = std::stoull(ckpt.meta.at("seed"));
  argem::EdgeSplit split = argem::split_edges(g, val_frac, test_frac, seed);
  argem::Propagator prop = argem::build_propagator(g.n, split.train_edges);
  argem::DenseMat z = embedding_from_weights(ckpt.weights, prop, g);
  argem::save_embedding_tsv(out_file, z, g.node_ids);
  std::cout << "embedding=" << out_file << "\n"
            << "rows=" << z.rows << "\n"
            << "cols=" << z.cols << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarially regularized graph embeddings"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "INI file with a section per subcommand, e.g. [train]");

  DatasetOpts dataset;
  TrainOpts topts;
  std::string out_dir = "argem_out";
  std::string task = "link";
  std::string checkpoint_path, embedding_path, export_out = "embedding.tsv";
  int repeat = 0, jobs = 1, clusters = 0, kmeans_restarts = 10;

  CLI::App* train = app.add_subcommand("train", "train a model, write checkpoint");
  train->fallthrough(true);
  add_dataset_flags(train, dataset);
  add_train_flags(train, topts);
  train->add_option("--out", out_dir, "output directory");

  CLI::App* eval = app.add_subcommand("eval", "evaluate link prediction or clustering");
  eval->fallthrough(true);
  add_dataset_flags(eval, dataset);
  add_train_flags(eval, topts);
  eval->add_option("--task", task, "link or cluster")
      ->check(CLI::IsMember({"link", "cluster"}));
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate");
  eval->add_option("--embedding", embedding_path, "embedding file to evaluate");
  eval->add_option("--repeat", repeat, "rerun train+eval across derived seeds");
  eval->add_option("--jobs", jobs, "parallel workers for --repeat");
  eval->add_option("--clusters", clusters, "cluster count (default: truth classes)");
  eval->add_option("--kmeans-restarts", kmeans_restarts, "k-means restarts");
  eval->add_option("--out", out_dir, "output directory for reports")
      ->default_val("");

  CLI::App* exp = app.add_subcommand("export", "write the embedding of a checkpoint");
  exp->fallthrough(true);
  add_dataset_flags(exp, dataset);
  exp->add_option("--checkpoint", checkpoint_path, "checkpoint to export")->required();
  exp->add_option("--out", export_out, "output embedding file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(dataset, topts, out_dir);
    if (eval->parsed())
      return cmd_eval(dataset, topts, task, checkpoint_path, embedding_path, repeat,
                      jobs, clusters, kmeans_restarts, out_dir);
    if (exp->parsed()) return cmd_export(dataset, checkpoint_path, export_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
