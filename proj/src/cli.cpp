#include "qualmap/cli.hpp"

#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "qualmap/error.hpp"
#include "qualmap/pipeline.hpp"
#include "qualmap/tensor_io.hpp"

namespace qualmap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string image_tokens;
    std::string value_matrix;
    std::string norm = "frobenius";
    std::string bank;
    std::string phrase_embeds;
    std::string conllu;
    bool merge_sentences = false;
    std::string prompt;
    std::string image;
    std::string alpha = "0.5,0.5,0.5";
    double beta = 0.5;
    double a_bound = 0.5;
    double tau = 0.6;
    double delta = 0.05;
    int total_steps = 20;
    std::string orientation = "literal";
    std::size_t height = 224;
    std::size_t width = 224;
    std::string out = ".";
    std::string map;
};

fs::path require_input(const std::string& value, const std::string& role, const std::string& flag) {
    if (value.empty()) throw Error(ErrorKind::MissingInput, role + " not given (" + flag + ")");
    fs::path p(value);
    std::error_code ec;
    if (!fs::is_regular_file(p, ec)) throw Error(ErrorKind::MissingInput, role + " not found: " + value);
    return p;
}

TokenMatrix load_tokens(const Options& o) {
    if (!o.value_matrix.empty()) {
        const auto path = require_input(o.value_matrix, "value matrix", "--value-matrix");
        const auto norm = o.norm == "per-row-l2" ? AttentionNorm::PerRowL2 : AttentionNorm::Frobenius;
        return vvv_attention(load_tensor(path), norm);
    }
    const auto path = require_input(o.image_tokens, "image tokens", "--image-tokens or --value-matrix");
    TokenMatrix t = load_tensor(path);
    grid_side(t);
    return t;
}

QualityTextBank load_bank(const Options& o) {
    return QualityTextBank(load_tensor(require_input(o.bank, "bank", "--bank")));
}

SyntaxTree load_tree(const Options& o) {
    const auto path = require_input(o.conllu, "CoNLL-U", "--conllu");
    const auto bytes = read_file_bytes(path);
    const std::string text(bytes.begin(), bytes.end());
    try {
        return parse_conllu(text, ConlluOptions{o.merge_sentences});
    } catch (const ParseError& e) {
        throw ParseError(e.line(), e.message() + " (" + path.string() + ")");
    }
}

PhraseEmbeddings load_embeds(const Options& o) {
    const auto grt = require_input(o.phrase_embeds, "phrase embeddings", "--phrase-embeds");
    const auto sidecar = require_input(sidecar_path(grt).string(), "phrase sidecar", "--phrase-embeds");
    return load_phrase_embeddings(grt, sidecar);
}

PenaltyThresholds parse_alpha(const std::string& s) {
    PenaltyThresholds t;
    std::stringstream ss(s);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= t.alpha.size()) throw ConfigError("--alpha takes exactly 3 comma-separated values");
        try {
            std::size_t used = 0;
            t.alpha[i] = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("--alpha value '" + item + "' is not a number");
        }
        ++i;
    }
    if (i != t.alpha.size()) throw ConfigError("--alpha takes exactly 3 comma-separated values");
    t.validate();
    return t;
}

PlanSettings settings_from(const Options& o) {
    PlanSettings s;
    s.alpha = parse_alpha(o.alpha);
    s.alignment = {o.a_bound, o.beta};
    s.alignment.validate();
    s.planner.tau = o.tau;
    s.planner.delta = o.delta;
    s.planner.total_steps = o.total_steps;
    s.planner.orientation = *parse_orientation(o.orientation);
    s.planner.validate();
    return s;
}

std::optional<std::string> prompt_override(const Options& o) {
    return o.prompt.empty() ? std::nullopt : std::optional<std::string>(o.prompt);
}

fs::path out_dir(const Options& o) {
    fs::path dir(o.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create output directory '" + o.out + "'");
    return dir;
}

void write_json(const fs::path& path, const json& doc) { write_file_atomic(path, doc.dump(2) + "\n"); }

void cmd_pq(const Options& o, std::ostream& out) {
    const PenaltyThresholds alpha = parse_alpha(o.alpha);
    const TokenMatrix tokens = load_tokens(o);
    const QualityTextBank bank = load_bank(o);
    const QualityMap p = pq_map(tokens, bank, alpha, o.height, o.width);
    const fs::path dir = out_dir(o);
    render_heatmap(p, dir / "pq.png");
    save_quality_map(p, dir / "pq.grt");
    write_json(dir / "pq.json", {{"p", round_sig9(p.summary)}, {"height", p.height}, {"width", p.width}});
    out << "p = " << round_sig9(p.summary) << "\n";
}

json aq_report(const AqResult& r) {
    std::map<int, const PhraseAlignment*> by_id;
    for (const auto& pa : r.alignments) by_id[pa.phrase_id] = &pa;

    json phrases = json::array();
    for (int id : r.segmentation.pns) {
        const auto* pa = by_id.at(id);
        phrases.push_back({{"noun_id", id},
                           {"text", r.phrase_texts.at(id)},
                           {"ancestor", r.segmentation.ans.at(id)},
                           {"a_phs", round_sig9(pa->score)},
                           {"a_pns", round_sig9(pa->noun_score)}});
    }
    json defects = json::array();
    for (const auto& d : r.defects) {
        const auto* pa = by_id.at(d.phrase_id);
        defects.push_back({{"phrase_id", d.phrase_id},
                           {"kind", std::string(to_string(d.kind))},
                           {"target", d.target},
                           {"text", r.phrase_texts.at(d.phrase_id)},
                           {"a_phs", round_sig9(pa->score)},
                           {"a_pns", round_sig9(pa->noun_score)}});
    }
    json emphasis = json::array();
    for (const auto& e : r.prompt.emphasis) emphasis.push_back({{"text", e.text}, {"weight", round_sig9(e.weight)}});
    return {{"a", round_sig9(r.a)},
            {"global_sim", round_sig9(r.global_sim)},
            {"fired", r.merged.fired},
            {"phrases", std::move(phrases)},
            {"defects", std::move(defects)},
            {"prompt", {{"original", r.prompt.original}, {"rendered", r.prompt.rendered()}, {"emphasis", emphasis}}}};
}

void cmd_aq(const Options& o, std::ostream& out) {
    AlignmentThresholds thresholds{o.a_bound, o.beta};
    thresholds.validate();
    SyntaxTree tree = load_tree(o);
    const TokenMatrix tokens = load_tokens(o);
    const PhraseEmbeddings embeds = load_embeds(o);
    const AqResult r = compute_aq(tokens, std::move(tree), embeds, thresholds, o.height, o.width, prompt_override(o));

    const fs::path dir = out_dir(o);
    std::error_code ec;
    if (r.merged.fired) {
        render_heatmap(r.merged.map, dir / "aq.png");
        save_quality_map(r.merged.map, dir / "aq.grt");
    } else {
        fs::remove(dir / "aq.png", ec);
        fs::remove(dir / "aq.grt", ec);
    }
    write_json(dir / "aq.json", aq_report(r));
    write_file_atomic(dir / "prompt.txt", r.prompt.rendered() + "\n");
    out << "a = " << round_sig9(r.a) << ", defects = " << r.defects.size() << "\n";
}

void cmd_plan(const Options& o, std::ostream& out) {
    const PlanSettings settings = settings_from(o);
    SyntaxTree tree = load_tree(o);
    const TokenMatrix tokens = load_tokens(o);
    const QualityTextBank bank = load_bank(o);
    const PhraseEmbeddings embeds = load_embeds(o);
    const PlanResult r = compute_plan(tokens, bank, std::move(tree), embeds, settings, o.height, o.width,
                                      prompt_override(o), o.image);
    const fs::path dir = out_dir(o);
    for (const auto& st : r.plan.stages) write_gray_png(st.mask.to_image(), dir / st.mask_path);
    write_file_atomic(dir / "plan.json", plan_to_json(r.plan));
    out << "stage 1: strength " << round_sig9(r.plan.stages[0].strength) << ", " << r.plan.stages[0].steps
        << " steps, " << r.plan.stages[0].mask.count() << " masked pixels\n"
        << "stage 2: strength " << round_sig9(r.plan.stages[1].strength) << ", " << r.plan.stages[1].steps
        << " steps\n";
}

void cmd_render(const Options& o, std::ostream& out) {
    const auto path = require_input(o.map, "map", "--map");
    const QualityMap m = load_quality_map(path);
    const fs::path dest = out_dir(o) / path.filename().replace_extension(".png");
    render_heatmap(m, dest);
    out << dest.string() << "\n";
}

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingInput: return kExitMissingInput;
        case ErrorKind::Format: return kExitParse;
        case ErrorKind::Degenerate:
        case ErrorKind::Dimension:
        case ErrorKind::Config: return kExitNumeric;
        case ErrorKind::Io: return kExitIo;
    }
    return kExitUsage;
}

std::string_view category(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::MissingInput: return "missing input";
        case ErrorKind::Format: return "parse error";
        case ErrorKind::Degenerate: return "degenerate input";
        case ErrorKind::Dimension: return "dimension mismatch";
        case ErrorKind::Config: return "invalid configuration";
        case ErrorKind::Io: return "i/o error";
    }
    return "error";
}

void add_token_flags(CLI::App* cmd, Options& o) {
    auto* tokens = cmd->add_option("--image-tokens", o.image_tokens,
                                   "GRT (1+L) x D image tokens: global token then a square grid of patches");
    auto* values = cmd->add_option("--value-matrix", o.value_matrix,
                                   "GRT value matrix; value-value attention is applied to produce the tokens");
    tokens->excludes(values);
    cmd->add_option("--norm", o.norm, "attention temperature for --value-matrix")
        ->check(CLI::IsMember({"frobenius", "per-row-l2"}));
}

void add_size_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--height", o.height, "output map height in pixels")->check(CLI::PositiveNumber);
    cmd->add_option("--width", o.width, "output map width in pixels")->check(CLI::PositiveNumber);
}

void add_prompt_flags(CLI::App* cmd, Options& o) {
    cmd->add_option("--phrase-embeds", o.phrase_embeds,
                    "GRT phrase embeddings; sidecar JSON with the same stem must sit beside it");
    cmd->add_option("--conllu", o.conllu, "CoNLL-U dependency parse of the prompt");
    cmd->add_flag("--merge-sentences", o.merge_sentences, "keep later sentences, attached under the first root");
    cmd->add_option("--prompt", o.prompt, "prompt text (defaults to the CoNLL-U '# text' line)");
    cmd->add_option("--a-bound", o.a_bound, "noun alignment bound in (0,1)");
    cmd->add_option("--beta", o.beta, "phrase alignment penalty threshold in (0,1)");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Pixel-level quality maps and two-stage refinement plans for generated images", "qualmap"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);

    auto* pq = app.add_subcommand("pq", "perceptual quality map: writes pq.png, pq.grt, pq.json");
    add_token_flags(pq, o);
    pq->add_option("--bank", o.bank, "GRT 8 x D quality text bank [pos0,neg0,...,pos3,neg3]");
    pq->add_option("--alpha", o.alpha, "defect thresholds a,b,c each in (0,1]");
    add_size_flags(pq, o);
    pq->add_option("--out", o.out, "output directory");

    auto* aq = app.add_subcommand("aq", "alignment quality map: writes aq.json, prompt.txt, and aq.png when defects fire");
    add_token_flags(aq, o);
    add_prompt_flags(aq, o);
    add_size_flags(aq, o);
    aq->add_option("--out", o.out, "output directory");

    auto* plan = app.add_subcommand("plan", "two-stage refinement plan: writes plan.json and stage masks");
    add_token_flags(plan, o);
    plan->add_option("--bank", o.bank, "GRT 8 x D quality text bank [pos0,neg0,...,pos3,neg3]");
    plan->add_option("--alpha", o.alpha, "defect thresholds a,b,c each in (0,1]");
    add_prompt_flags(plan, o);
    plan->add_option("--tau", o.tau, "mask binarisation threshold");
    plan->add_option("--delta", o.delta, "stage 2 strength in [0,1]");
    plan->add_option("--total-steps", o.total_steps, "iteration budget split evenly across the stages");
    plan->add_option("--orientation", o.orientation, "stage 1 strength: (p+a)/2 or 1-(p+a)/2")
        ->check(CLI::IsMember({"literal", "inverted"}));
    plan->add_option("--image", o.image, "path or URI of the image the plan refines");
    add_size_flags(plan, o);
    plan->add_option("--out", o.out, "output directory");

    auto* render = app.add_subcommand("render", "render a GRT quality map as an 8-bit grayscale PNG");
    render->add_option("--map", o.map, "GRT height x width map");
    render->add_option("--out", o.out, "output directory");

    std::vector<std::string> argv_store{"qualmap"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*pq) cmd_pq(o, out);
        else if (*aq) cmd_aq(o, out);
        else if (*plan) cmd_plan(o, out);
        else if (*render) cmd_render(o, out);
    } catch (const Error& e) {
        err << "qualmap: " << category(e.kind()) << ": " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "qualmap: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitOk;
}

}  // namespace qualmap
