#include "fedadc/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include "fedadc/errors.hpp"
#include "fedadc/loss.hpp"
#include "fedadc/version.hpp"

namespace fs = std::filesystem;

namespace fedadc {

std::vector<int> select_random(std::size_t num_clients, std::size_t k, rng::Engine& eng) {
    if (k == 0 || k > num_clients)
        throw InputError("select_random: subset size out of range");
    const auto picks = rng::sample_without_replacement(eng, num_clients, k);
    std::vector<int> out;
    out.reserve(picks.size());
    for (auto p : picks) out.push_back(static_cast<int>(p));
    return out;
}

namespace {

std::size_t missing_count(const std::vector<ClientShard>& shards, std::size_t num_classes,
                          const std::vector<int>& subset) {
    std::vector<bool> covered(num_classes, false);
    for (int c : subset)
        for (std::size_t cls = 0; cls < num_classes; ++cls)
            if (shards[static_cast<std::size_t>(c)].holds_class(cls)) covered[cls] = true;
    return static_cast<std::size_t>(std::count(covered.begin(), covered.end(), false));
}

std::vector<std::size_t> missing_classes(const std::vector<ClientShard>& shards,
                                         std::size_t num_classes,
                                         const std::vector<int>& subset) {
    std::vector<bool> covered(num_classes, false);
    for (int c : subset)
        for (std::size_t cls = 0; cls < num_classes; ++cls)
            if (shards[static_cast<std::size_t>(c)].holds_class(cls)) covered[cls] = true;
    std::vector<std::size_t> missing;
    for (std::size_t cls = 0; cls < num_classes; ++cls)
        if (!covered[cls]) missing.push_back(cls);
    return missing;
}

std::string class_list(const std::vector<std::size_t>& classes) {
    std::string s;
    for (std::size_t c : classes) {
        if (!s.empty()) s += ", ";
        s += std::to_string(c);
    }
    return s;
}

// Local search: swap one member for one outsider whenever that strictly
// reduces the number of uncovered classes. Scans ascending for determinism.
std::optional<std::vector<int>> repair_cover(const std::vector<ClientShard>& shards,
                                             std::size_t num_classes, std::vector<int> subset) {
    std::size_t missing = missing_count(shards, num_classes, subset);
    while (missing > 0) {
        bool improved = false;
        for (std::size_t cand = 0; cand < shards.size() && !improved; ++cand) {
            const int cand_id = static_cast<int>(cand);
            if (std::find(subset.begin(), subset.end(), cand_id) != subset.end()) continue;
            for (std::size_t pos = 0; pos < subset.size(); ++pos) {
                std::vector<int> trial = subset;
                trial[pos] = cand_id;
                const std::size_t trial_missing = missing_count(shards, num_classes, trial);
                if (trial_missing < missing) {
                    subset = std::move(trial);
                    missing = trial_missing;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) return std::nullopt;
    }
    std::sort(subset.begin(), subset.end());
    return subset;
}

// Exhaustive backtracking: branch on the uncovered class with the fewest
// holders, try each holder ascending. Used as the last resort so that the
// no-cover error fires only when no covering subset of size k exists at all.
bool exact_cover_search(const std::vector<ClientShard>& shards, std::size_t num_classes,
                        std::size_t k, std::vector<int>& chosen, std::vector<bool>& in_use) {
    std::vector<bool> covered(num_classes, false);
    for (int c : chosen)
        for (std::size_t cls = 0; cls < num_classes; ++cls)
            if (shards[static_cast<std::size_t>(c)].holds_class(cls)) covered[cls] = true;

    std::size_t target = num_classes;
    std::size_t target_holders = shards.size() + 1;
    std::size_t uncovered = 0;
    for (std::size_t cls = 0; cls < num_classes; ++cls) {
        if (covered[cls]) continue;
        ++uncovered;
        std::size_t holders = 0;
        for (const auto& sh : shards)
            if (sh.holds_class(cls)) ++holders;
        if (holders < target_holders) {
            target = cls;
            target_holders = holders;
        }
    }
    if (uncovered == 0) return true;
    if (chosen.size() >= k) return false;
    // Each remaining pick covers at most the max shard label count; prune when
    // even that cannot close the gap.
    std::size_t max_labels = 0;
    for (const auto& sh : shards) max_labels = std::max(max_labels, sh.distinct_labels());
    if (uncovered > (k - chosen.size()) * max_labels) return false;

    for (std::size_t c = 0; c < shards.size(); ++c) {
        if (in_use[c] || !shards[c].holds_class(target)) continue;
        chosen.push_back(static_cast<int>(c));
        in_use[c] = true;
        if (exact_cover_search(shards, num_classes, k, chosen, in_use)) return true;
        in_use[c] = false;
        chosen.pop_back();
    }
    return false;
}

}  // namespace

std::vector<int> select_class_cover(const std::vector<ClientShard>& shards,
                                    std::size_t num_classes, std::size_t k, rng::Engine& eng,
                                    std::size_t max_retries) {
    if (k == 0 || k > shards.size())
        throw InputError("select_class_cover: subset size out of range");

    std::vector<int> everyone(shards.size());
    for (std::size_t i = 0; i < shards.size(); ++i) everyone[i] = static_cast<int>(i);
    if (missing_count(shards, num_classes, everyone) > 0)
        throw SelectionError("class-cover selection: no client holds classes " +
                             class_list(missing_classes(shards, num_classes, everyone)));

    std::vector<int> sample;
    for (std::size_t attempt = 0; attempt < max_retries; ++attempt) {
        const auto picks = rng::sample_without_replacement(eng, shards.size(), k);
        sample.assign(picks.begin(), picks.end());
        if (missing_count(shards, num_classes, sample) == 0) return sample;
    }

    // Rejection exhausted: complete random draws by swapping members until the
    // cover closes, so fallback rounds still spread participation broadly.
    constexpr std::size_t kRepairRestarts = 32;
    for (std::size_t attempt = 0; attempt < kRepairRestarts; ++attempt) {
        const auto picks = rng::sample_without_replacement(eng, shards.size(), k);
        sample.assign(picks.begin(), picks.end());
        if (auto repaired = repair_cover(shards, num_classes, sample)) return *repaired;
    }

    std::vector<int> chosen;
    std::vector<bool> in_use(shards.size(), false);
    if (exact_cover_search(shards, num_classes, k, chosen, in_use)) {
        // Top up with random non-members when the cover needs fewer than k.
        while (chosen.size() < k) {
            const auto extra = static_cast<int>(rng::uniform_below(eng, shards.size()));
            if (!in_use[static_cast<std::size_t>(extra)]) {
                in_use[static_cast<std::size_t>(extra)] = true;
                chosen.push_back(extra);
            }
        }
        std::sort(chosen.begin(), chosen.end());
        return chosen;
    }
    // Infeasible: name the classes left out by a best-effort greedy cover.
    std::vector<int> best;
    std::vector<bool> covered(num_classes, false);
    for (std::size_t pick = 0; pick < k; ++pick) {
        std::size_t arg = shards.size();
        std::size_t best_gain = 0;
        for (std::size_t c = 0; c < shards.size(); ++c) {
            if (std::find(best.begin(), best.end(), static_cast<int>(c)) != best.end()) continue;
            std::size_t gain = 0;
            for (std::size_t cls = 0; cls < num_classes; ++cls)
                if (!covered[cls] && shards[c].holds_class(cls)) ++gain;
            if (arg == shards.size() || gain > best_gain) {
                arg = c;
                best_gain = gain;
            }
        }
        best.push_back(static_cast<int>(arg));
        for (std::size_t cls = 0; cls < num_classes; ++cls)
            if (shards[arg].holds_class(cls)) covered[cls] = true;
    }
    throw SelectionError("class-cover selection: no subset of size " + std::to_string(k) +
                         " covers classes " +
                         class_list(missing_classes(shards, num_classes, best)));
}

namespace {

Batch dataset_batch(const LabeledDataset& ds) {
    Batch b;
    b.features = ds.features;
    b.labels = ds.labels;
    return b;
}

}  // namespace

std::pair<double, double> evaluate_global(const ModelSpec& spec, const ParamVector& params,
                                          const LabeledDataset& test) {
    if (test.size() == 0) throw InputError("evaluate_global: empty test set");
    const Batch batch = dataset_batch(test);
    const Matrix logits = forward(spec, params, batch);
    std::size_t hits = 0;
    double loss_sum = 0.0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const double* z = logits.row(r);
        std::size_t best = 0;
        for (std::size_t kk = 1; kk < logits.cols; ++kk)
            if (z[kk] > z[best]) best = kk;
        if (static_cast<int>(best) == batch.labels[r]) ++hits;
        const auto probs = softmax_temp({z, logits.cols}, 1.0);
        loss_sum += -std::log(std::max(probs[static_cast<std::size_t>(batch.labels[r])], 1e-12));
    }
    const auto n = static_cast<double>(test.size());
    return {static_cast<double>(hits) / n, loss_sum / n};
}

RunRecord run_experiment(const ExperimentConfig& cfg, const RunHooks* hooks) {
    cfg.validate();
    ExperimentConfig resolved = cfg;

    LabeledDataset train;
    LabeledDataset test;
    if (resolved.data.source == DataConfig::Source::Synthetic) {
        const LabeledDataset full = gen_synthetic(
            resolved.data.classes, resolved.data.input_dim,
            resolved.data.train_per_class + resolved.data.test_per_class,
            resolved.data.class_separation, resolved.seed);
        auto split = split_per_class(full, resolved.data.test_per_class);
        train = std::move(split.first);
        test = std::move(split.second);
    } else {
        train = import_dataset(resolved.data.train_path);
        test = import_dataset(resolved.data.test_path);
        if (test.input_dim() != train.input_dim() || test.num_classes != train.num_classes)
            throw ConfigError("run: train and test datasets disagree on shape");
        resolved.model.input_dim = train.input_dim();
        resolved.model.num_classes = train.num_classes;
        resolved.model.validate();
        resolved.partition.validate(train.num_classes);
    }

    RunRecord record;
    std::size_t dropped = 0;
    const std::vector<ClientShard> shards = make_partition(train, resolved.partition, &dropped);
    if (dropped > 0)
        record.notes.push_back("partition dropped " + std::to_string(dropped) +
                               " samples to equalize shard sizes");

    const ModelSpec& model = resolved.model;
    rng::Engine init_eng = rng::make_stream(resolved.seed, rng::Purpose::MODEL_INIT);
    ParamVector theta0 = init_params(model, init_eng);

    const bool momentum_rule = resolved.local.rule == LocalRule::FedAdcHeavyball ||
                               resolved.local.rule == LocalRule::FedAdcNesterov ||
                               resolved.local.rule == LocalRule::FedAdcDoubleMomentum;
    const std::size_t nominal_h =
        resolved.local.budget == BudgetKind::Iterations ? resolved.local.iterations : 1;
    ServerState state = ServerState::init(std::move(theta0), resolved.alpha,
                                          resolved.beta_global, resolved.beta_local,
                                          resolved.eta, nominal_h);

    const bool combined = resolved.local.loss.kind == LossKind::Combined;
    const std::size_t num_selected = resolved.clients_per_round();
    const auto total_rounds = static_cast<int>(resolved.rounds);

    for (int t = 1; t <= total_rounds; ++t) {
        const auto t_start = std::chrono::steady_clock::now();
        if (hooks && hooks->before_round) hooks->before_round(state);

        rng::Engine sel_eng =
            rng::make_stream(resolved.seed, rng::Purpose::SELECTION, static_cast<std::uint64_t>(t));
        std::vector<int> selected;
        if (resolved.selection == SelectionPolicy::Random) {
            selected = select_random(shards.size(), num_selected, sel_eng);
        } else {
            selected = select_class_cover(shards, train.num_classes, num_selected, sel_eng);
            if (missing_count(shards, train.num_classes, selected) > 0)
                throw SelectionError("round " + std::to_string(t) +
                                     ": selected clients do not cover every class");
        }

        if (t == 1 && resolved.local.budget == BudgetKind::Epochs) {
            std::size_t lo = 0;
            std::size_t hi = 0;
            for (int c : selected) {
                const std::size_t h =
                    resolved.local.steps_for(shards[static_cast<std::size_t>(c)].train_indices().size());
                lo = lo == 0 ? h : std::min(lo, h);
                hi = std::max(hi, h);
            }
            record.notes.push_back("epoch budget: per-client local steps in [" +
                                   std::to_string(lo) + ", " + std::to_string(hi) + "]");
        }

        const TeacherSnapshot teacher{state.theta, model, resolved.local.loss.tau};
        const ParamVector zero_mbar = ParamVector::zeros_like(state.theta);

        std::vector<ClientUpdate> updates(selected.size());
        std::vector<LocalTrace> traces(selected.size());
        std::vector<std::exception_ptr> errors(selected.size());
        std::atomic<std::size_t> next{0};
        auto work = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= selected.size()) break;
                try {
                    const auto& shard = shards[static_cast<std::size_t>(selected[i])];
                    const std::size_t h = resolved.local.steps_for(shard.train_indices().size());
                    const ParamVector m_bar =
                        momentum_rule
                            ? normalize_momentum(state.momentum, resolved.beta_local, h)
                            : zero_mbar;
                    rng::Engine eng = rng::make_stream(resolved.seed, rng::Purpose::CLIENT_BATCHES,
                                                       static_cast<std::uint64_t>(t),
                                                       static_cast<std::uint64_t>(selected[i]));
                    updates[i] = local_round(state.theta, m_bar, train, shard, resolved.local,
                                             model, combined ? &teacher : nullptr, eng,
                                             resolved.eta, t, &traces[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        };
        const std::size_t workers = std::min<std::size_t>(resolved.threads, selected.size());
        if (workers <= 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
            for (auto& th : pool) th.join();
        }
        for (const auto& err : errors)
            if (err) std::rethrow_exception(err);

        if (hooks && hooks->after_client)
            for (std::size_t i = 0; i < updates.size(); ++i)
                hooks->after_client(t, updates[i], traces[i]);

        switch (resolved.algorithm) {
            case Algorithm::FedAvg:
            case Algorithm::FedProx:
                state = server_update_fedavg(state, updates);
                break;
            case Algorithm::SlowMo:
                state = server_update_slowmo(state, pseudo_delta(updates, resolved.eta));
                break;
            case Algorithm::FedAdcHeavyball:
            case Algorithm::FedAdcNesterov:
                state = server_update_fedadc(state, pseudo_delta(updates, resolved.eta));
                break;
            case Algorithm::FedAdcDm:
                state = server_update_dm(state, pseudo_delta(updates, resolved.eta));
                break;
        }
        if (!state.theta.all_finite())
            throw DivergedClientError(t, -1, "non-finite global model after aggregation");

        RoundMetrics rm;
        rm.round = t;
        rm.selected = selected;
        const auto [acc, loss] = evaluate_global(model, state.theta, test);
        rm.global_acc = acc;
        rm.global_loss = loss;
        double loss_sum = 0.0;
        for (const auto& tr : traces) loss_sum += tr.mean_loss();
        rm.mean_train_loss = loss_sum / static_cast<double>(traces.size());
        rm.elapsed_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t_start)
                            .count();
        record.rounds.push_back(std::move(rm));

        if (hooks && hooks->after_round) hooks->after_round(state);
    }

    const std::size_t tail = std::min<std::size_t>(10, record.rounds.size());
    double acc_sum = 0.0;
    for (std::size_t i = record.rounds.size() - tail; i < record.rounds.size(); ++i)
        acc_sum += record.rounds[i].global_acc;
    record.final_acc = acc_sum / static_cast<double>(tail);

    if (resolved.personalize) {
        std::vector<ParamVector> personal;
        personal.reserve(shards.size());
        for (const auto& shard : shards) {
            rng::Engine eng = rng::make_stream(resolved.seed, rng::Purpose::PERSONALIZATION,
                                               static_cast<std::uint64_t>(shard.client_id));
            personal.push_back(calibrate(state.theta, model, train, shard, resolved.pers, eng));
        }
        record.pers_acc = evaluate_personalized(train, shards, personal, model);
        const std::vector<ParamVector> global_copies(shards.size(), state.theta);
        record.global_mean_local_acc =
            evaluate_personalized(train, shards, global_copies, model).mean;
        record.personalized = true;
    }

    record.config = std::move(resolved);
    return record;
}

namespace {

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_file_atomic(const fs::path& dir, const std::string& name,
                       const std::string& content) {
    const fs::path tmp = dir / (name + ".tmp");
    const fs::path dst = dir / name;
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, dst, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + " to " + dst.string() + ": " +
                          ec.message());
}

}  // namespace

void emit(const RunRecord& record, const std::string& out_dir) {
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());

    std::string csv = "round,selected_clients,global_acc,global_loss,mean_train_loss,elapsed_ms\n";
    for (const auto& rm : record.rounds) {
        csv += std::to_string(rm.round);
        csv += ',';
        for (std::size_t i = 0; i < rm.selected.size(); ++i) {
            if (i > 0) csv += ';';
            csv += std::to_string(rm.selected[i]);
        }
        csv += ',';
        csv += fmt6(rm.global_acc);
        csv += ',';
        csv += fmt6(rm.global_loss);
        csv += ',';
        csv += fmt6(rm.mean_train_loss);
        csv += ",0\n";
    }
    write_file_atomic(dir, "metrics.csv", csv);

    nlohmann::ordered_json root;
    root["config"] = config_to_json(record.config);
    root["version"] = kVersion;
    root["seed"] = record.config.seed;
    root["final_acc"] = record.final_acc;
    nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
    for (const auto& rm : record.rounds) {
        nlohmann::ordered_json r;
        r["round"] = rm.round;
        r["selected"] = rm.selected;
        r["global_acc"] = rm.global_acc;
        r["global_loss"] = rm.global_loss;
        r["mean_train_loss"] = rm.mean_train_loss;
        r["elapsed_ms"] = rm.elapsed_ms;
        rounds.push_back(std::move(r));
    }
    root["rounds"] = std::move(rounds);
    if (record.personalized) {
        nlohmann::ordered_json p;
        p["per_client_acc"] = record.pers_acc.per_client;
        p["mean_acc"] = record.pers_acc.mean;
        p["global_mean_local_acc"] = record.global_mean_local_acc;
        root["personalization"] = std::move(p);
    }
    if (!record.notes.empty()) root["notes"] = record.notes;
    write_file_atomic(dir, "summary.json", root.dump(2) + "\n");
}

}  // namespace fedadc
