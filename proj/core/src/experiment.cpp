#include "ordcast/experiment.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "ordcast/checkpoint.hpp"
#include "ordcast/embedding.hpp"
#include "ordcast/errors.hpp"
#include "ordcast/forecast.hpp"

namespace fs = std::filesystem;

namespace ordcast {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

std::string sanitize_filename(const std::string& id) {
    std::string out = id;
    for (char& c : out)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.')
            c = '_';
    return out;
}

void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown config key '" + it.key() + "' in " + where);
    }
}

GpKernel parse_kernel(const std::string& name) {
    if (name == "matern52") return GpKernel::Matern52;
    if (name == "rq") return GpKernel::RationalQuadratic;
    throw ConfigError("unknown GP kernel '" + name + "' (expected matern52 or rq)");
}

ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    check_keys(j,
               {"protocol", "manifest", "output_dir", "seed", "m", "context_len", "lookback",
                "horizon", "n_samples", "argmax_feedback", "checkpoint", "checkpoint_dir",
                "grid", "ar_orders", "gp_kernels", "train", "train_stride", "finetune_epochs",
                "embed"},
               "config");

    ExperimentConfig c;
    try {
        c.protocol = j.value("protocol", c.protocol);
        c.manifest_path = j.value("manifest", c.manifest_path);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.seed = j.value("seed", c.seed);
        c.m = j.value("m", c.m);
        c.context_len = j.value("context_len", c.context_len);
        c.lookback = j.value("lookback", c.lookback);
        c.horizon = j.value("horizon", c.horizon);
        c.n_samples = j.value("n_samples", c.n_samples);
        c.argmax_feedback = j.value("argmax_feedback", c.argmax_feedback);
        c.checkpoint = j.value("checkpoint", c.checkpoint);
        c.checkpoint_dir = j.value("checkpoint_dir", c.checkpoint_dir);

        if (j.contains("grid")) {
            const auto& g = j.at("grid");
            check_keys(g, {"n_h", "dropout", "l2"}, "grid");
            c.grid_n_h = g.value("n_h", c.grid_n_h);
            c.grid_dropout = g.value("dropout", c.grid_dropout);
            c.grid_l2 = g.value("l2", c.grid_l2);
        }
        c.ar_orders = j.value("ar_orders", c.ar_orders);
        if (j.contains("gp_kernels")) {
            c.gp_kernels.clear();
            for (const auto& k : j.at("gp_kernels"))
                c.gp_kernels.push_back(parse_kernel(k.get<std::string>()));
        }
        if (j.contains("train")) {
            const auto& t = j.at("train");
            check_keys(t,
                       {"n_h", "dropout", "l2", "max_epochs", "patience", "learning_rate",
                        "batch_size", "encoder_len", "decoder_len"},
                       "train");
            c.train.n_h = t.value("n_h", c.train.n_h);
            c.train.dropout_rate = t.value("dropout", c.train.dropout_rate);
            c.train.l2_lambda = t.value("l2", c.train.l2_lambda);
            c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
            c.train.patience = t.value("patience", c.train.patience);
            c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
            c.train.batch_size = t.value("batch_size", c.train.batch_size);
            c.train.encoder_len = t.value("encoder_len", c.train.encoder_len);
            c.train.decoder_len = t.value("decoder_len", c.train.decoder_len);
        }
        c.train_stride = j.value("train_stride", c.train_stride);
        c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
        if (j.contains("embed")) {
            const auto& e = j.at("embed");
            check_keys(e, {"window_len", "per_series", "k_min", "k_max"}, "embed");
            c.embed_window = e.value("window_len", c.embed_window);
            c.embed_per_series = e.value("per_series", c.embed_per_series);
            c.k_min = e.value("k_min", c.k_min);
            c.k_max = e.value("k_max", c.k_max);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed experiment config: ") + e.what());
    }
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["protocol"] = c.protocol;
    j["manifest"] = c.manifest_path;
    j["output_dir"] = c.output_dir;
    j["seed"] = c.seed;
    j["m"] = c.m;
    j["context_len"] = c.context_len;
    j["lookback"] = c.lookback;
    j["horizon"] = c.horizon;
    j["n_samples"] = c.n_samples;
    j["argmax_feedback"] = c.argmax_feedback;
    j["checkpoint"] = c.checkpoint;
    j["checkpoint_dir"] = c.checkpoint_dir;
    j["grid"] = {{"n_h", c.grid_n_h}, {"dropout", c.grid_dropout}, {"l2", c.grid_l2}};
    j["ar_orders"] = c.ar_orders;
    j["gp_kernels"] = nlohmann::json::array();
    for (GpKernel k : c.gp_kernels) j["gp_kernels"].push_back(kernel_name(k));
    j["train"] = {{"n_h", c.train.n_h},
                  {"dropout", c.train.dropout_rate},
                  {"l2", c.train.l2_lambda},
                  {"max_epochs", c.train.max_epochs},
                  {"patience", c.train.patience},
                  {"learning_rate", c.train.learning_rate},
                  {"batch_size", c.train.batch_size},
                  {"encoder_len", c.train.encoder_len},
                  {"decoder_len", c.train.decoder_len}};
    j["train_stride"] = c.train_stride;
    j["finetune_epochs"] = c.finetune_epochs;
    j["embed"] = {{"window_len", c.embed_window},
                  {"per_series", c.embed_per_series},
                  {"k_min", c.k_min},
                  {"k_max", c.k_max}};
    return j;
}

void apply_overrides(nlohmann::json& j, const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override must look like key=value, got '" + ov + "'");
        const std::string path = ov.substr(0, eq);
        const std::string value = ov.substr(eq + 1);

        nlohmann::json* cur = &j;
        std::size_t start = 0;
        while (true) {
            const auto dot = path.find('.', start);
            const std::string part = path.substr(start, dot - start);
            if (part.empty()) throw ConfigError("bad override path '" + path + "'");
            if (dot == std::string::npos) {
                nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
                if (parsed.is_discarded()) parsed = value;  // bare string
                (*cur)[part] = parsed;
                break;
            }
            cur = &((*cur)[part]);
            start = dot + 1;
        }
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path);
    out << text;
}

void write_resolved_config(const ExperimentConfig& cfg) {
    write_text_file((fs::path(cfg.output_dir) / "resolved_config.json").string(),
                    config_to_json(cfg).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// shared run plumbing
// ---------------------------------------------------------------------------

struct NamedPredictive {
    std::string model;
    std::string family;
    std::unique_ptr<StepwisePredictive> pred;
};

struct SeriesEval {
    std::string id;
    std::vector<double> truth;
    std::vector<NamedPredictive> preds;
};

void write_forecast_csv(const std::string& dir, const SeriesEval& ev) {
    static const double kLevels[] = {0.05, 0.25, 0.5, 0.75, 0.95};
    static const char* kLevelNames[] = {"q05", "q25", "q50", "q75", "q95"};

    std::ostringstream out;
    out << "step,truth";
    for (const auto& np : ev.preds) {
        out << "," << np.model << "_mean";
        for (const char* ln : kLevelNames) out << "," << np.model << "_" << ln;
    }
    out << "\n";
    for (int t = 0; t < static_cast<int>(ev.truth.size()); ++t) {
        out << (t + 1) << "," << fmt_double(ev.truth[static_cast<std::size_t>(t)]);
        for (const auto& np : ev.preds) {
            out << "," << fmt_double(np.pred->mean(t));
            for (double lv : kLevels) out << "," << fmt_double(np.pred->quantile(t, lv));
        }
        out << "\n";
    }
    write_text_file((fs::path(dir) / (sanitize_filename(ev.id) + ".csv")).string(), out.str());
}

void write_reports_csv(const std::string& path, const std::vector<MetricRecord>& records) {
    std::ostringstream out;
    out << "series,model,family,nll,rmse,qq\n";
    for (const auto& r : records) {
        if (r.series_id.find(',') != std::string::npos ||
            r.model.find(',') != std::string::npos)
            throw DataError("series/model names must not contain commas");
        out << r.series_id << "," << r.model << "," << r.family << "," << fmt_double(r.nll)
            << "," << fmt_double(r.rmse) << "," << fmt_double(r.qq) << "\n";
    }
    write_text_file(path, out.str());
}

void write_skipped_csv(const std::string& path,
                       const std::vector<std::pair<std::string, std::string>>& skipped) {
    std::ostringstream out;
    out << "subject,reason\n";
    for (const auto& [what, reason] : skipped) {
        std::string clean = reason;
        for (char& ch : clean)
            if (ch == ',' || ch == '\n') ch = ';';
        out << what << "," << clean << "\n";
    }
    write_text_file(path, out.str());
}

std::string render_rank_report(const std::vector<MetricRecord>& records,
                               const RankTable& table) {
    std::ostringstream out;
    out << "Mean fractional rank (1 = best) per family, best variant per series\n\n";
    out << format_rank_table(table);

    std::vector<std::string> models;
    for (const auto& r : records)
        if (std::find(models.begin(), models.end(), r.model) == models.end())
            models.push_back(r.model);
    const std::string lead =
        std::find(models.begin(), models.end(), "gum") != models.end() ? "gum" : models.front();

    out << "\nShare of series where " << lead << " strictly beats each model (%)\n\n";
    std::size_t width = 8;
    for (const auto& m : models) width = std::max(width, m.size() + 2);
    out << std::string(width, ' ');
    char buf[40];
    for (Metric m : kAllMetrics) {
        std::snprintf(buf, sizeof(buf), "%10s", metric_name(m).c_str());
        out << buf;
    }
    out << "\n";
    for (const auto& m : models) {
        if (m == lead) continue;
        out << m << std::string(width - m.size(), ' ');
        for (Metric metric : kAllMetrics) {
            std::snprintf(buf, sizeof(buf), "%10.1f",
                          100.0 * outperformance(records, lead, m, metric));
            out << buf;
        }
        out << "\n";
    }
    return out.str();
}

void write_run_outputs(const ExperimentConfig& cfg, const RunSummary& sum) {
    const fs::path dir(cfg.output_dir);
    write_reports_csv((dir / "reports.csv").string(), sum.records);
    write_text_file((dir / "rank_table.txt").string(),
                    render_rank_report(sum.records, sum.table));
    write_skipped_csv((dir / "skipped.csv").string(), sum.skipped);
    write_resolved_config(cfg);
}

struct AuxPool {
    std::vector<OrdinalWindow> train;
    std::vector<OrdinalWindow> val;
};

AuxPool build_aux_pool(const DatasetManifest& man, const ExperimentConfig& cfg,
                       const TrainingConfig& tc) {
    const auto aux = man.with_role(SeriesRole::Auxiliary);
    if (aux.empty()) throw DataError("manifest lists no auxiliary series");
    AuxPool pool;
    for (const auto& entry : aux) {
        const TimeSeries s = load_series(entry.path, entry.id);
        const OrdinalQuantizer q = build_quantizer(s, cfg.m, tc.decoder_len, /*extend=*/true);
        const auto windows =
            make_windows(q.encode(s.values), tc.encoder_len, tc.decoder_len, cfg.train_stride);
        const WindowSplit split = split_windows(windows, 0.2);
        pool.train.insert(pool.train.end(), split.train.begin(), split.train.end());
        pool.val.insert(pool.val.end(), split.validation.begin(), split.validation.end());
    }
    return pool;
}

std::string pretrain_and_save(const DatasetManifest& man, const ExperimentConfig& cfg,
                              TrainingConfig tc, const std::string& path) {
    const AuxPool pool = build_aux_pool(man, cfg, tc);
    const OrdinalQuantizer nominal(cfg.m, 0.0, 1.0, "pooled-unit-range");
    const Seq2SeqModel init = init_seq2seq(nominal, tc);
    TrainResult res = train(init, pool.train, tc, pool.val);
    CheckpointMetadata meta;
    meta.epochs_run = res.history.epochs_run;
    meta.best_epoch = res.history.best_epoch;
    meta.best_val_loss = res.history.best_val_loss;
    meta.seed = tc.seed;
    save_checkpoint(res.model, meta, path);
    return path;
}

void write_training_log(const std::string& path, const LossHistory& h) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,clip_events\n";
    for (std::size_t e = 0; e < h.train_loss.size(); ++e)
        out << (e + 1) << "," << fmt_double(h.train_loss[e]) << "," << fmt_double(h.val_loss[e])
            << "," << h.clip_events[e] << "\n";
    write_text_file(path, out.str());
}

}  // namespace

// ---------------------------------------------------------------------------
// config surface
// ---------------------------------------------------------------------------

std::string GridPoint::tag() const {
    return "nh" + std::to_string(n_h) + "-d" + fmt_short(dropout) + "-l" + fmt_short(l2);
}

std::vector<GridPoint> ExperimentConfig::grid() const {
    std::vector<GridPoint> out;
    for (int nh : grid_n_h)
        for (double d : grid_dropout)
            for (double l : grid_l2) out.push_back(GridPoint{nh, d, l});
    return out;
}

void ExperimentConfig::validate() const {
    if (m <= 0) throw ConfigError("m must be positive");
    if (context_len <= 0) throw ConfigError("context_len must be positive");
    if (lookback <= 0) throw ConfigError("lookback must be positive");
    if (horizon <= 0) throw ConfigError("horizon must be positive");
    if (n_samples <= 0) throw ConfigError("n_samples must be positive");
    if (grid_n_h.empty() || grid_dropout.empty() || grid_l2.empty())
        throw ConfigError("hyperparameter grid lists must be non-empty");
    for (int nh : grid_n_h)
        if (nh <= 0) throw ConfigError("grid n_h values must be positive");
    for (double d : grid_dropout)
        if (d < 0.0 || d >= 1.0) throw ConfigError("grid dropout values must lie in [0, 1)");
    for (double l : grid_l2)
        if (l < 0.0) throw ConfigError("grid l2 values must be non-negative");
    if (ar_orders.empty()) throw ConfigError("ar_orders must be non-empty");
    for (int p : ar_orders)
        if (p <= 0) throw ConfigError("AR orders must be positive");
    if (gp_kernels.empty()) throw ConfigError("gp_kernels must be non-empty");
    if (train_stride <= 0) throw ConfigError("train_stride must be positive");
    if (finetune_epochs <= 0) throw ConfigError("finetune_epochs must be positive");
    if (embed_window <= 0) throw ConfigError("embed window_len must be positive");
    if (embed_per_series <= 0) throw ConfigError("embed per_series must be positive");
    if (k_min < 2) throw ConfigError("embed k_min must be at least 2");
    if (k_max < k_min) throw ConfigError("embed k_max must be >= k_min");
    train.validate();
}

ExperimentConfig experiment_config_from_json_text(const std::string& text,
                                                  const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("experiment config is not valid JSON");
    apply_overrides(j, overrides);
    ExperimentConfig cfg = parse_config(j);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return experiment_config_from_json_text(buf.str(), overrides);
}

std::string experiment_config_to_json_text(const ExperimentConfig& cfg) {
    return config_to_json(cfg).dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// train-gum
// ---------------------------------------------------------------------------

std::string train_gum(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.manifest_path.empty()) throw ConfigError("train-gum requires a manifest path");
    const DatasetManifest man = load_manifest(cfg.manifest_path);
    fs::create_directories(cfg.output_dir);

    TrainingConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "train-gum");

    const AuxPool pool = build_aux_pool(man, cfg, tc);
    const OrdinalQuantizer nominal(cfg.m, 0.0, 1.0, "pooled-unit-range");
    const Seq2SeqModel init = init_seq2seq(nominal, tc);
    TrainResult res = train(init, pool.train, tc, pool.val);

    const std::string path = cfg.checkpoint.empty()
                                 ? (fs::path(cfg.output_dir) / "gum.ckpt").string()
                                 : cfg.checkpoint;
    CheckpointMetadata meta;
    meta.epochs_run = res.history.epochs_run;
    meta.best_epoch = res.history.best_epoch;
    meta.best_val_loss = res.history.best_val_loss;
    meta.seed = tc.seed;
    save_checkpoint(res.model, meta, path);
    write_training_log((fs::path(cfg.output_dir) / "training_log.csv").string(), res.history);
    write_resolved_config(cfg);
    return path;
}

// ---------------------------------------------------------------------------
// zero-shot
// ---------------------------------------------------------------------------

RunSummary run_zero_shot(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.manifest_path.empty()) throw ConfigError("zero-shot requires a manifest path");
    if (cfg.checkpoint.empty()) throw ConfigError("zero-shot requires a checkpoint path");

    const DatasetManifest man = load_manifest(cfg.manifest_path);
    const LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint);
    const Seq2SeqModel& model = loaded.model;
    if (model.bins() != cfg.m)
        throw ConfigError("config m=" + std::to_string(cfg.m) + " disagrees with checkpoint m=" +
                          std::to_string(model.bins()));

    const auto evals = man.with_role(SeriesRole::Evaluation);
    if (evals.empty()) throw DataError("manifest lists no evaluation series");

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir / "forecasts");

    RunSummary sum;
    for (const auto& entry : evals) {
        const TimeSeries s = load_series(entry.path, entry.id);
        const int need = cfg.context_len + cfg.horizon;
        if (static_cast<int>(s.size()) < need) {
            sum.skipped.emplace_back(entry.id, "length " + std::to_string(s.size()) +
                                                   " below context+horizon " +
                                                   std::to_string(need));
            continue;
        }
        const std::vector<double> context(s.values.begin(), s.values.begin() + cfg.context_len);
        SeriesEval ev;
        ev.id = entry.id;
        ev.truth.assign(s.values.begin() + cfg.context_len, s.values.begin() + need);

        try {
            TimeSeries ctx_series;
            ctx_series.id = entry.id;
            ctx_series.values = context;
            const OrdinalQuantizer q =
                build_quantizer(ctx_series, model.bins(), cfg.horizon, /*extend=*/true);
            ForecastOptions opts;
            opts.horizon = cfg.horizon;
            opts.n_samples = cfg.n_samples;
            opts.seed = derive_seed(cfg.seed, "zero-shot-" + entry.id);
            opts.argmax_feedback = cfg.argmax_feedback;
            Forecast fc = forecast(model, q, q.encode(context), opts);
            ev.preds.push_back({"gum", "gum",
                                std::make_unique<OrdinalPredictive>(std::move(fc))});
        } catch (const std::exception& e) {
            sum.skipped.emplace_back(entry.id + "/gum", e.what());
        }

        for (int p : cfg.ar_orders) {
            const std::string name = "ar-" + std::to_string(p);
            try {
                const ArModel ar = fit_ar(context, p);
                ev.preds.push_back({name, "ar",
                                    std::make_unique<GaussianPredictive>(
                                        ar_forecast(ar, context, cfg.horizon))});
            } catch (const std::exception& e) {
                sum.skipped.emplace_back(entry.id + "/" + name, e.what());
            }
        }
        for (GpKernel kern : cfg.gp_kernels) {
            const std::string name = "gp-" + kernel_name(kern);
            try {
                const GpModel gp =
                    fit_gp(context, kern, derive_seed(cfg.seed, name + "-" + entry.id));
                ev.preds.push_back({name, "gp",
                                    std::make_unique<GaussianPredictive>(
                                        gp_forecast(gp, cfg.horizon))});
            } catch (const std::exception& e) {
                sum.skipped.emplace_back(entry.id + "/" + name, e.what());
            }
        }

        for (const auto& np : ev.preds)
            sum.records.push_back(score(ev.id, np.model, np.family, *np.pred, ev.truth));
        write_forecast_csv((dir / "forecasts").string(), ev);
    }

    if (sum.records.empty()) throw DataError("zero-shot run scored no series");
    sum.table = rank_table(sum.records);
    write_run_outputs(cfg, sum);
    return sum;
}

// ---------------------------------------------------------------------------
// few-shot
// ---------------------------------------------------------------------------

RunSummary run_few_shot(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.manifest_path.empty()) throw ConfigError("few-shot requires a manifest path");

    const DatasetManifest man = load_manifest(cfg.manifest_path);
    const auto evals = man.with_role(SeriesRole::Evaluation);
    if (evals.empty()) throw DataError("manifest lists no evaluation series");

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir / "forecasts");
    const fs::path ckpt_dir = cfg.checkpoint_dir.empty()
                                  ? dir / "checkpoints"
                                  : fs::path(cfg.checkpoint_dir);
    fs::create_directories(ckpt_dir);

    // pretrained grid, trained on demand
    const std::vector<GridPoint> grid = cfg.grid();
    std::map<std::string, LoadedCheckpoint> bank;
    for (const GridPoint& g : grid) {
        const std::string path = (ckpt_dir / ("gum-" + g.tag() + ".ckpt")).string();
        if (!fs::exists(path)) {
            TrainingConfig tc = cfg.train;
            tc.n_h = g.n_h;
            tc.dropout_rate = g.dropout;
            tc.l2_lambda = g.l2;
            tc.seed = derive_seed(cfg.seed, "pretrain-" + g.tag());
            pretrain_and_save(man, cfg, tc, path);
        }
        bank.emplace(g.tag(), load_checkpoint(path));
    }

    RunSummary sum;
    std::ostringstream selection;
    selection << "series,selected,finetune_val_loss,scratch_val_loss\n";

    for (const auto& entry : evals) {
        const TimeSeries s = load_series(entry.path, entry.id);
        const int min_history =
            std::max(cfg.lookback, cfg.train.encoder_len + cfg.train.decoder_len +
                                       cfg.train_stride);
        if (static_cast<int>(s.size()) < min_history + cfg.horizon) {
            sum.skipped.emplace_back(
                entry.id, "length " + std::to_string(s.size()) + " below history+horizon " +
                              std::to_string(min_history + cfg.horizon));
            continue;
        }

        TimeSeries history;
        history.id = entry.id;
        history.values.assign(s.values.begin(), s.values.end() - cfg.horizon);
        SeriesEval ev;
        ev.id = entry.id;
        ev.truth.assign(s.values.end() - cfg.horizon, s.values.end());
        const std::vector<double> lookback(history.values.end() - cfg.lookback,
                                           history.values.end());

        // fine-tune the whole grid, keep the best validation loss
        std::optional<TrainResult> best;
        std::string best_tag;
        for (const GridPoint& g : grid) {
            const LoadedCheckpoint& pre = bank.at(g.tag());
            TrainingConfig ft = pre.model.hyper;
            ft.max_epochs = cfg.finetune_epochs;
            ft.patience = cfg.train.patience;
            ft.learning_rate = cfg.train.learning_rate;
            ft.batch_size = cfg.train.batch_size;
            ft.encoder_len = cfg.train.encoder_len;
            ft.decoder_len = cfg.train.decoder_len;
            ft.seed = derive_seed(cfg.seed, "finetune-" + g.tag() + "-" + entry.id);
            try {
                TrainResult res = finetune(pre.model, history, ft, cfg.horizon, cfg.train_stride);
                if (!best || res.history.best_val_loss < best->history.best_val_loss) {
                    best = std::move(res);
                    best_tag = g.tag();
                }
            } catch (const std::exception& e) {
                sum.skipped.emplace_back(entry.id + "/finetune-" + g.tag(), e.what());
            }
        }
        if (!best) {
            sum.skipped.emplace_back(entry.id, "no grid checkpoint could be fine-tuned");
            continue;
        }

        // from-scratch reference: same selected hyperparameters, twice the epochs
        TrainingConfig nv = best->model.hyper;
        nv.max_epochs = 2 * cfg.finetune_epochs;
        nv.seed = derive_seed(cfg.seed, "scratch-" + entry.id);
        std::optional<TrainResult> naive;
        try {
            const OrdinalQuantizer nominal(cfg.m, 0.0, 1.0, "scratch-init");
            naive = finetune(init_seq2seq(nominal, nv), history, nv, cfg.horizon,
                             cfg.train_stride);
        } catch (const std::exception& e) {
            sum.skipped.emplace_back(entry.id + "/naive", e.what());
        }

        selection << entry.id << "," << best_tag << ","
                  << fmt_double(best->history.best_val_loss) << ","
                  << (naive ? fmt_double(naive->history.best_val_loss) : "") << "\n";

        ForecastOptions opts;
        opts.horizon = cfg.horizon;
        opts.n_samples = cfg.n_samples;
        opts.argmax_feedback = cfg.argmax_feedback;
        try {
            opts.seed = derive_seed(cfg.seed, "few-shot-" + entry.id);
            Forecast fc = forecast(best->model, best->model.quantizer,
                                   best->model.quantizer.encode(lookback), opts);
            ev.preds.push_back({"gum", "gum",
                                std::make_unique<OrdinalPredictive>(std::move(fc))});
        } catch (const std::exception& e) {
            sum.skipped.emplace_back(entry.id + "/gum", e.what());
        }
        if (naive) {
            try {
                opts.seed = derive_seed(cfg.seed, "few-shot-naive-" + entry.id);
                Forecast fc = forecast(naive->model, naive->model.quantizer,
                                       naive->model.quantizer.encode(lookback), opts);
                ev.preds.push_back({"naive", "naive",
                                    std::make_unique<OrdinalPredictive>(std::move(fc))});
            } catch (const std::exception& e) {
                sum.skipped.emplace_back(entry.id + "/naive", e.what());
            }
        }
        for (int p : cfg.ar_orders) {
            const std::string name = "ar-" + std::to_string(p);
            try {
                const ArModel ar = fit_ar(lookback, p);
                ev.preds.push_back({name, "ar",
                                    std::make_unique<GaussianPredictive>(
                                        ar_forecast(ar, lookback, cfg.horizon))});
            } catch (const std::exception& e) {
                sum.skipped.emplace_back(entry.id + "/" + name, e.what());
            }
        }
        for (GpKernel kern : cfg.gp_kernels) {
            const std::string name = "gp-" + kernel_name(kern);
            try {
                const GpModel gp =
                    fit_gp(lookback, kern, derive_seed(cfg.seed, name + "-" + entry.id));
                ev.preds.push_back({name, "gp",
                                    std::make_unique<GaussianPredictive>(
                                        gp_forecast(gp, cfg.horizon))});
            } catch (const std::exception& e) {
                sum.skipped.emplace_back(entry.id + "/" + name, e.what());
            }
        }

        for (const auto& np : ev.preds)
            sum.records.push_back(score(ev.id, np.model, np.family, *np.pred, ev.truth));
        write_forecast_csv((dir / "forecasts").string(), ev);
    }

    if (sum.records.empty()) throw DataError("few-shot run scored no series");
    sum.table = rank_table(sum.records);
    write_text_file((dir / "selection.csv").string(), selection.str());
    write_run_outputs(cfg, sum);
    return sum;
}

// ---------------------------------------------------------------------------
// embedding
// ---------------------------------------------------------------------------

EmbeddingSummary run_embedding(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.manifest_path.empty()) throw ConfigError("embed requires a manifest path");
    if (cfg.checkpoint.empty()) throw ConfigError("embed requires a checkpoint path");

    const DatasetManifest man = load_manifest(cfg.manifest_path);
    const LoadedCheckpoint loaded = load_checkpoint(cfg.checkpoint);
    const Seq2SeqModel& model = loaded.model;

    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);

    std::vector<Excerpt> excerpts;
    std::vector<std::pair<std::string, std::string>> skipped;
    for (const auto& entry : man.series) {
        const TimeSeries s = load_series(entry.path, entry.id);
        if (entry.role == SeriesRole::Auxiliary) {
            if (static_cast<int>(s.size()) < cfg.embed_window) {
                skipped.emplace_back(entry.id, "shorter than the excerpt window");
                continue;
            }
            const OrdinalQuantizer q =
                build_quantizer(s, model.bins(), cfg.train.decoder_len, /*extend=*/true);
            Rng rng(derive_seed(cfg.seed, "embed-" + entry.id));
            const auto ex = sample_excerpts(encode_series(q, s), entry.id,
                                            SeriesRole::Auxiliary, cfg.embed_window,
                                            cfg.embed_per_series, rng);
            excerpts.insert(excerpts.end(), ex.begin(), ex.end());
        } else {
            if (static_cast<int>(s.size()) < cfg.context_len) {
                skipped.emplace_back(entry.id, "shorter than the evaluation context");
                continue;
            }
            TimeSeries ctx;
            ctx.id = entry.id;
            ctx.values.assign(s.values.begin(), s.values.begin() + cfg.context_len);
            const OrdinalQuantizer q =
                build_quantizer(ctx, model.bins(), cfg.horizon, /*extend=*/true);
            Excerpt e;
            e.sequence = encode_series(q, ctx);
            e.source_id = entry.id;
            e.offset = 0;
            e.group = SeriesRole::Evaluation;
            excerpts.push_back(std::move(e));
        }
    }
    if (excerpts.empty()) throw DataError("embedding run collected no excerpts");

    const auto vectors = extract_embeddings(model, excerpts);
    const int n = static_cast<int>(vectors.size());
    const int k_max = std::min(cfg.k_max, n);
    if (cfg.k_min > k_max)
        throw DataError("embedding run has " + std::to_string(n) +
                        " vectors, fewer than k_min=" + std::to_string(cfg.k_min));

    const auto [k, clusters] = select_k(vectors, cfg.k_min, k_max);
    const double score = silhouette(vectors, clusters.assignments);
    const Eigen::MatrixXd coords = project_2d(vectors);

    write_vectors_csv((dir / "vectors.csv").string(), vectors);
    write_clusters_csv((dir / "clusters.csv").string(), vectors, clusters, coords);
    nlohmann::json j{{"k", k},
                     {"silhouette", score},
                     {"vectors", n},
                     {"k_min", cfg.k_min},
                     {"k_max_used", k_max}};
    write_text_file((dir / "embedding.json").string(), j.dump(2) + "\n");
    write_skipped_csv((dir / "skipped.csv").string(), skipped);
    write_resolved_config(cfg);

    EmbeddingSummary sum;
    sum.k = k;
    sum.silhouette_score = score;
    sum.vector_count = n;
    return sum;
}

// ---------------------------------------------------------------------------
// report recomputation
// ---------------------------------------------------------------------------

std::vector<MetricRecord> read_reports_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open reports file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "series,model,family,nll,rmse,qq")
        throw DataError("unrecognized reports header in " + path);

    std::vector<MetricRecord> records;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::array<std::string, 6> fields;
        std::size_t start = 0;
        for (int f = 0; f < 6; ++f) {
            const auto comma = line.find(',', start);
            if (f < 5 && comma == std::string::npos)
                throw DataError(path + ": row " + std::to_string(row) + ": expected 6 fields");
            fields[static_cast<std::size_t>(f)] = line.substr(start, comma - start);
            start = comma + 1;
        }
        MetricRecord r;
        r.series_id = fields[0];
        r.model = fields[1];
        r.family = fields[2];
        try {
            r.nll = std::stod(fields[3]);
            r.rmse = std::stod(fields[4]);
            r.qq = std::stod(fields[5]);
        } catch (const std::exception&) {
            throw DataError(path + ": row " + std::to_string(row) + ": bad metric value");
        }
        records.push_back(std::move(r));
    }
    return records;
}

RankTable recompute_report(const std::string& reports_csv, const std::string& out_path) {
    const auto records = read_reports_csv(reports_csv);
    RankTable table = rank_table(records);
    write_text_file(out_path, render_rank_report(records, table));
    return table;
}

}  // namespace ordcast
