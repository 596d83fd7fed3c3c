// Command-line surface: prepare, train, generate, evaluate, inspect.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpag/checkpoint.hpp"
#include "mpag/config.hpp"
#include "mpag/dataset.hpp"
#include "mpag/metrics.hpp"
#include "mpag/model.hpp"
#include "mpag/prepare.hpp"
#include "mpag/retrieval.hpp"
#include "mpag/train.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string data_path;
    std::string out_path;
    std::string profile = "full";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool data_required = true) {
    cmd->add_option("--config", args.config_path, "key=value config file");
    auto* d = cmd->add_option("--data", args.data_path, "dataset file (JSON lines)");
    if (data_required) d->required();
    cmd->add_option("--out", args.out_path, "output file or directory");
    cmd->add_option("--seed", args.seed, "override the config seed");
    cmd->add_option("--profile", args.profile, "base profile: full or desk")
        ->check(CLI::IsMember({"full", "desk"}));
}

mpag::Config resolve_config(const CommonArgs& args) {
    mpag::Config base =
        args.profile == "desk" ? mpag::Config::desk_profile() : mpag::Config{};
    mpag::Config cfg = args.config_path.empty() ? base : mpag::load_config(args.config_path, base);
    if (args.seed) cfg.seed = *args.seed;
    cfg.validate();
    return cfg;
}

void require_same_shape_keys(const mpag::Config& a, const mpag::Config& b) {
    if (a.hidden != b.hidden || a.embedding != b.embedding || a.slots != b.slots ||
        a.read_heads != b.read_heads || a.widths != b.widths || a.vocab_size != b.vocab_size)
        throw mpag::ConfigError(
            "config overrides change model dimensions; they must match the checkpoint");
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    return out;
}

int cmd_prepare(const CommonArgs& args, const std::string& index_out) {
    mpag::Config cfg = resolve_config(args);
    if (args.out_path.empty()) throw mpag::ConfigError("prepare: --out is required");
    auto records = mpag::load_raw_dataset(args.data_path);
    mpag::ensure_prepared(records, cfg);
    mpag::save_raw_dataset(records, args.out_path);
    if (!index_out.empty()) {
        mpag::QaIndex qa = mpag::QaIndex::build(records);
        qa.index.save(index_out);
    }
    std::cout << json{{"prepared", records.size()}, {"out", args.out_path}}.dump() << "\n";
    return 0;
}

int cmd_train(const CommonArgs& args, const std::string& resume_path) {
    mpag::Config cfg = resolve_config(args);
    if (args.out_path.empty()) throw mpag::ConfigError("train: --out directory is required");
    fs::create_directories(args.out_path);

    auto records = mpag::load_raw_dataset(args.data_path);
    mpag::ensure_prepared(records, cfg);

    mpag::TrainingState st;
    if (resume_path.empty()) {
        mpag::Vocabulary vocab =
            mpag::Vocabulary::build(mpag::vocab_streams(records), cfg.vocab_size);
        st.model = mpag::Model::create(cfg, std::move(vocab));
        st.rng = mpag::Rng(cfg.seed);
    } else {
        st = mpag::load_checkpoint(resume_path);
        mpag::Config resumed = st.model.cfg;
        resumed.epochs = cfg.epochs; // continuation length may grow
        require_same_shape_keys(resumed, cfg);
        st.model.cfg = resumed;
    }

    auto data = mpag::prepare_examples(records, st.model.vocab, st.model.cfg);

    std::ofstream log_file(fs::path(args.out_path) / "train_log.jsonl",
                           resume_path.empty() ? std::ios::trunc : std::ios::app);
    auto log = [&](const mpag::TrainLogEntry& e) {
        json line = {{"epoch", e.epoch}, {"step", e.step}, {"loss", e.loss}};
        std::cout << line.dump() << "\n";
        log_file << line.dump() << "\n";
    };
    std::string ckpt_path = (fs::path(args.out_path) / "model.ckpt").string();
    auto on_epoch = [&](const mpag::TrainingState& s) { mpag::save_checkpoint(s, ckpt_path); };

    mpag::train_run(st, data, log, on_epoch);
    if (st.epoch == 0) mpag::save_checkpoint(st, ckpt_path); // epochs=0 still yields a model
    return 0;
}

int cmd_generate(const CommonArgs& args, const std::string& checkpoint_path,
                 const std::string& baseline) {
    if (args.out_path.empty()) throw mpag::ConfigError("generate: --out is required");
    auto records = mpag::load_raw_dataset(args.data_path);

    std::ofstream out(args.out_path);
    if (!out) throw mpag::IoError("cannot write output file: " + args.out_path);

    if (!baseline.empty()) {
        mpag::Config cfg = resolve_config(args);
        mpag::BaselineMethod method =
            baseline == "bm25" ? mpag::BaselineMethod::Bm25 : mpag::BaselineMethod::Tfidf;
        for (const auto& rec : records) {
            std::vector<std::vector<std::string>> reviews;
            for (const auto& r : rec.reviews) reviews.push_back(mpag::tokenize(r));
            json line;
            line["id"] = rec.id;
            if (reviews.empty()) {
                line["answer"] = "";
            } else {
                line["answer"] = mpag::join_tokens(mpag::baseline_answer(
                    mpag::tokenize(rec.question), reviews, method, cfg.bm25_k1, cfg.bm25_b));
            }
            line["gate_trace"] = json::array();
            line["log_prob"] = 0.0;
            out << line.dump() << "\n";
        }
        return 0;
    }

    mpag::TrainingState st = mpag::load_checkpoint(checkpoint_path);
    // model shape comes from the checkpoint; a config file may adjust decode
    // knobs (beam, length caps) but not dimensions
    if (!args.config_path.empty()) {
        mpag::Config merged = mpag::load_config(args.config_path, st.model.cfg);
        require_same_shape_keys(st.model.cfg, merged);
        st.model.cfg = merged;
    }
    mpag::ensure_prepared(records, st.model.cfg);

    for (const auto& rec : records) {
        mpag::PreparedExample pe = mpag::prepare_example(rec, st.model.vocab, st.model.cfg);
        mpag::Generation gen =
            mpag::generate(st.model, pe, st.model.cfg.beam, st.model.cfg.max_a_len);
        json line;
        line["id"] = rec.id;
        line["answer"] = mpag::join_tokens(mpag::detokenize(gen.tokens, st.model.vocab));
        line["gate_trace"] = gen.gate_trace;
        line["log_prob"] = gen.log_prob;
        out << line.dump() << "\n";
    }
    return 0;
}

int cmd_evaluate(const CommonArgs& args, const std::string& answers_path,
                 const std::string& checkpoint_path) {
    auto records = mpag::load_raw_dataset(args.data_path);

    std::ifstream in(answers_path);
    if (!in) throw mpag::DataError("cannot open answers file: " + answers_path);
    std::map<std::string, std::string> answer_of;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::exception& e) {
            throw mpag::DataError(answers_path + ":" + std::to_string(line_no) +
                                  ": malformed JSON: " + e.what());
        }
        if (!obj.contains("id") || !obj.contains("answer"))
            throw mpag::DataError(answers_path + ":" + std::to_string(line_no) +
                                  ": answers need \"id\" and \"answer\" fields");
        answer_of[obj["id"].get<std::string>()] = obj["answer"].get<std::string>();
    }

    std::vector<std::string> missing, extra;
    for (const auto& rec : records)
        if (!answer_of.count(rec.id)) missing.push_back(rec.id);
    {
        std::map<std::string, bool> known;
        for (const auto& rec : records) known[rec.id] = true;
        for (const auto& [id, a] : answer_of)
            if (!known.count(id)) extra.push_back(id);
    }
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "answer/dataset id mismatch";
        if (!missing.empty()) msg += "; missing answers for: " + join_ids(missing);
        if (!extra.empty()) msg += "; answers without dataset entries: " + join_ids(extra);
        throw mpag::DataError(msg);
    }

    std::vector<std::vector<std::string>> candidates, references;
    for (const auto& rec : records) {
        candidates.push_back(mpag::tokenize(answer_of[rec.id]));
        references.push_back(mpag::tokenize(rec.answer));
    }

    mpag::EmbeddingTable table;
    std::string embedding_source;
    if (!checkpoint_path.empty()) {
        mpag::TrainingState st = mpag::load_checkpoint(checkpoint_path);
        table = mpag::EmbeddingTable::from_vocab(st.model.params.at("embed").value,
                                                 st.model.vocab.tokens());
        embedding_source = "checkpoint";
    } else {
        // deterministic fallback table over the dataset vocabulary
        mpag::Config cfg = resolve_config(args);
        mpag::Vocabulary vocab =
            mpag::Vocabulary::build(mpag::vocab_streams(records), cfg.vocab_size);
        mpag::Rng rng(cfg.seed);
        mpag::Tensor m({vocab.size(), 64});
        for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
        table = mpag::EmbeddingTable::from_vocab(std::move(m), vocab.tokens());
        embedding_source = "seeded-random";
    }

    mpag::MetricReport rep = mpag::evaluate_corpus(candidates, references, table);
    json out = {{"bleu", rep.bleu_overall},
                {"bleu_n", rep.bleu_n},
                {"emb_average", rep.emb_average},
                {"emb_greedy", rep.emb_greedy},
                {"emb_extreme", rep.emb_extreme},
                {"distinct_n", rep.distinct},
                {"pairs", rep.pairs},
                {"pairs_skipped_embedding", rep.pairs_skipped_embedding},
                {"embedding_source", embedding_source}};
    std::cout << out.dump() << "\n";
    if (!args.out_path.empty()) {
        std::ofstream of(args.out_path);
        if (!of) throw mpag::IoError("cannot write report: " + args.out_path);
        of << out.dump() << "\n";
    }
    return 0;
}

int cmd_inspect(const CommonArgs& args, const std::string& checkpoint_path,
                const std::string& example_id) {
    auto records = mpag::load_raw_dataset(args.data_path);
    mpag::TrainingState st = mpag::load_checkpoint(checkpoint_path);
    mpag::ensure_prepared(records, st.model.cfg);

    const mpag::RawRecord* target = nullptr;
    for (const auto& rec : records)
        if (rec.id == example_id) target = &rec;
    if (!target) throw mpag::DataError("unknown example id: " + example_id);

    mpag::PreparedExample pe = mpag::prepare_example(*target, st.model.vocab, st.model.cfg);
    mpag::InspectReport rep =
        mpag::inspect_example(st.model, pe, st.model.cfg.beam, st.model.cfg.max_a_len);

    json clusters = json::array();
    for (std::size_t c = 0; c < rep.clusters.size(); ++c) {
        const auto& d = rep.clusters[c];
        clusters.push_back({{"cluster_index", c},
                            {"empty", d.empty},
                            {"salience", d.salience},
                            {"write_weights", d.write_weights},
                            {"read_weights", d.read_weights}});
    }
    json steps = json::array();
    for (const auto& s : rep.steps)
        steps.push_back({{"gamma", s.gate},
                         {"question_attention", s.question_attention},
                         {"skeleton_attention", s.skeleton_attention},
                         {"cluster_attention", s.cluster_attention}});
    json out = {{"id", example_id},
                {"generated_answer",
                 mpag::join_tokens(mpag::detokenize(rep.generated, st.model.vocab))},
                {"log_prob", rep.log_prob},
                {"clusters", clusters},
                {"steps", steps}};
    std::cout << out.dump() << "\n";
    if (!args.out_path.empty()) {
        std::ofstream of(args.out_path);
        if (!of) throw mpag::IoError("cannot write report: " + args.out_path);
        of << out.dump() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"answer generation from reviews, attributes and prototype QA pairs"};
    app.require_subcommand(1);

    CommonArgs prepare_args, train_args, gen_args, eval_args, inspect_args;
    std::string index_out, resume_path, gen_checkpoint, baseline, answers_path, eval_checkpoint,
        inspect_checkpoint, example_id;

    auto* prepare = app.add_subcommand("prepare", "retrieve prototypes and cache review clusters");
    add_common(prepare, prepare_args);
    prepare->add_option("--index-out", index_out, "also persist the question index");

    auto* train = app.add_subcommand("train", "train a model");
    add_common(train, train_args);
    train->add_option("--resume", resume_path, "checkpoint to resume from");

    auto* generate = app.add_subcommand("generate", "beam-search answers for a dataset");
    add_common(generate, gen_args);
    generate->add_option("--checkpoint", gen_checkpoint, "trained model checkpoint");
    generate->add_option("--baseline", baseline, "extractive baseline instead of the model")
        ->check(CLI::IsMember({"bm25", "tfidf"}));

    auto* evaluate = app.add_subcommand("evaluate", "score generated answers against gold");
    add_common(evaluate, eval_args);
    evaluate->add_option("--answers", answers_path, "generated answers file")->required();
    evaluate->add_option("--checkpoint", eval_checkpoint,
                         "checkpoint supplying the embedding table");

    auto* inspect = app.add_subcommand("inspect", "dump attention and gate diagnostics");
    add_common(inspect, inspect_args);
    inspect->add_option("--checkpoint", inspect_checkpoint, "trained model checkpoint")->required();
    inspect->add_option("--id", example_id, "example id to inspect")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (prepare->parsed()) return cmd_prepare(prepare_args, index_out);
        if (train->parsed()) return cmd_train(train_args, resume_path);
        if (generate->parsed()) {
            if (gen_checkpoint.empty() && baseline.empty())
                throw mpag::ConfigError("generate: need --checkpoint or --baseline");
            return cmd_generate(gen_args, gen_checkpoint, baseline);
        }
        if (evaluate->parsed()) return cmd_evaluate(eval_args, answers_path, eval_checkpoint);
        if (inspect->parsed()) return cmd_inspect(inspect_args, inspect_checkpoint, example_id);
    } catch (const mpag::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mpag::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
