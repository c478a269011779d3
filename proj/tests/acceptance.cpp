// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "support/random_tree.hpp"
#include "support/test_support.hpp"

#include "qualmap/aq_map.hpp"
#include "qualmap/attention.hpp"
#include "qualmap/cli.hpp"
#include "qualmap/pipeline.hpp"
#include "qualmap/pq_map.hpp"
#include "qualmap/prompt_parser.hpp"
#include "qualmap/refine_planner.hpp"
#include "qualmap/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace qualmap;
using nlohmann::json;

namespace {

constexpr double kRelTol = 1e-5;
constexpr int kPropertyCases = 1000;

// Collects failures for one criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        ++checks_;
        if (!ok && failures_.size() < 5) failures_.push_back(what);
        if (!ok) ++failed_;
    }
    void close(double got, double want, const std::string& what, double abs_floor = 0.0) {
        const bool ok = std::abs(got - want) <= kRelTol * std::abs(want) + abs_floor;
        if (!ok) {
            std::ostringstream os;
            os.precision(12);
            os << what << ": got " << got << ", want " << want;
            expect(false, os.str());
        } else {
            expect(true, what);
        }
    }
    bool ok() const { return failed_ == 0 && checks_ > 0; }
    std::size_t checks() const { return checks_; }
    std::string summary() const {
        std::string s = std::to_string(failed_) + "/" + std::to_string(checks_) + " checks failed";
        for (const auto& f : failures_) s += "\n      " + f;
        return s;
    }

private:
    std::size_t checks_ = 0;
    std::size_t failed_ = 0;
    std::vector<std::string> failures_;
};

int g_failed = 0;

void report(const std::string& name, const std::function<std::string(Check&)>& body) {
    Check c;
    std::string detail;
    try {
        detail = body(c);
    } catch (const std::exception& e) {
        c.expect(false, std::string("exception: ") + e.what());
    }
    const bool ok = c.ok();
    if (!ok) ++g_failed;
    std::cout << (ok ? "PASS  " : "FAIL  ") << name;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << "\n";
    if (!ok) std::cout << "      " << c.summary() << "\n";
}

// ---- oracle equivalence ---------------------------------------------------

std::string oracle_equivalence(Check& c) {
    const auto doc = test::read_json(test::fixture_dir() / "oracle_cases.json");
    std::size_t n_att = 0, n_logit = 0, n_two = 0, n_score = 0, nb = 0;

    for (const auto& cs : doc.at("attention")) {
        const auto v = test::tensor_from_json(cs.at("v"));
        const auto norm = cs.at("norm") == "frobenius" ? AttentionNorm::Frobenius : AttentionNorm::PerRowL2;
        const auto out = vvv_attention(v, norm);
        const auto& want = cs.at("expected");
        for (std::size_t r = 0; r < out.rows(); ++r)
            for (std::size_t k = 0; k < out.cols(); ++k)
                c.close(out.at(r, k), want[r][k].get<double>(), "attention case " + std::to_string(n_att));
        ++n_att;
    }

    for (const auto& cs : doc.at("logits")) {
        const auto tokens = test::tensor_from_json(cs.at("tokens"));
        const QualityTextBank bank(test::tensor_from_json(cs.at("bank")));
        PenaltyThresholds t;
        for (std::size_t i = 0; i < 3; ++i) t.alpha[i] = cs.at("alpha")[i].get<float>();
        const auto raw = raw_logits(tokens, bank);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t k = 0; k < raw.count; ++k)
                c.close(raw.factor[i][k], cs.at("raw")[i][k].get<double>(), "raw logit case " + std::to_string(n_logit));
        const auto per = cask_combine(raw, t);
        for (std::size_t k = 0; k < per.size(); ++k)
            c.close(per[k], cs.at("per")[k].get<double>(), "cask case " + std::to_string(n_logit));
        ++n_logit;
    }

    for (const auto& cs : doc.at("two_way")) {
        const auto tokens = test::tensor_from_json(cs.at("tokens"));
        const auto text = test::floats_from_json(cs.at("text"));
        const auto empty = test::floats_from_json(cs.at("empty"));
        const auto got = two_way_softmax(tokens, text, empty);
        for (std::size_t k = 0; k < got.size(); ++k)
            c.close(got[k], cs.at("expected")[k].get<double>(), "two-way softmax case " + std::to_string(n_two));
        ++n_two;
    }

    for (const auto& cs : doc.at("alignment_score")) {
        const auto scores = cs.at("scores").get<std::vector<double>>();
        const double got = alignment_score(cs.at("global").get<double>(), scores, cs.at("beta").get<double>());
        c.close(got, cs.at("expected").get<double>(), "alignment score case " + std::to_string(n_score));
        ++n_score;
    }

    for (const auto& cs : doc.at("bicubic")) {
        const auto& g = cs.at("grid");
        std::vector<double> grid;
        for (const auto& row : g)
            for (const auto& v : row) grid.push_back(v.get<double>());
        const std::size_t h = cs.at("height"), w = cs.at("width");
        const auto out = bicubic_upsample(grid, g.size(), g.at(0).size(), h, w);
        for (std::size_t i = 0; i < out.size(); ++i)
            c.close(out[i], cs.at("expected")[i / w][i % w].get<double>(), "bicubic case " + std::to_string(nb),
                    1e-7);
        ++nb;
    }

    c.expect(n_att >= 200 && n_logit >= 200 && n_two >= 200 && n_score >= 200, "at least 200 cases per formula");
    return "cases: attention " + std::to_string(n_att) + ", logits+cask " + std::to_string(n_logit) + ", two-way " +
           std::to_string(n_two) + ", score " + std::to_string(n_score) + ", bicubic " + std::to_string(nb) +
           "; rel tol 1e-5";
}

// ---- phrase ancestors -----------------------------------------------------

std::string ancestor_equivalence(Check& c) {
    std::mt19937_64 rng(20240612);
    std::uniform_int_distribution<int> size(1, 12);
    std::uniform_real_distribution<double> rate(0.0, 0.9);
    std::vector<SyntaxTree> trees;
    std::vector<PhraseSegmentation> segs;
    for (int i = 0; i < 500; ++i) {
        trees.push_back(test::random_tree(rng, size(rng), rate(rng)));
        segs.push_back(segment_phrases(trees.back()));
    }
    std::vector<std::map<int, int>> got(trees.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < trees.size(); ++i) got[i] = get_phrase_ancestor(trees[i], segs[i]);
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    for (std::size_t i = 0; i < trees.size(); ++i)
        c.expect(got[i] == test::brute_force_ancestors(trees[i], segs[i]), "tree " + std::to_string(i));
    c.expect(elapsed < 1.0, "runtime under 1 s");

    // the documented fixture
    const auto tree = parse_conllu(test::read_text(test::fixture_dir() / "defect" / "prompt.conllu"));
    const auto seg = analyze_prompt(tree);
    c.expect(seg.ans == std::map<int, int>{{3, 3}, {7, 3}}, "fixture ancestors {cat: cat, table: cat}");

    char buf[64];
    std::snprintf(buf, sizeof buf, "500 trees, %.4f s", elapsed);
    return buf;
}

// ---- structural constants -------------------------------------------------

std::string structural_constants(Check& c) {
    const auto bank_tensor = load_tensor(test::fixture_dir() / "defect" / "bank.grt");
    const QualityTextBank bank(bank_tensor);
    c.expect(kQualityFactors == 4, "four quality factors");
    c.expect(bank_tensor.rows() == 2 * kQualityFactors, "bank has 4 pairs");
    c.expect(bank.dim() == 512, "bank rows are 512 long");

    const PlannerConfig defaults;
    c.expect(defaults.total_steps == 20, "default budget is 20");
    const auto plan = plan_refinement(0.5, 0.5, BinaryMask::filled(1, 1, 0), EmphasizedPrompt{"x", {}}, PlanSettings{});
    c.expect(plan.stages.size() == 2, "two stages");
    c.expect(plan.stages[0].steps == 10 && plan.stages[1].steps == 10, "default split 10/10");
    return "bank " + std::to_string(bank_tensor.rows() / 2) + " pairs x " + std::to_string(bank.dim()) +
           ", steps " + std::to_string(plan.stages[0].steps) + "/" + std::to_string(plan.stages[1].steps);
}

// ---- invariant suites -----------------------------------------------------

RawLogits column(std::array<double, 4> v) {
    RawLogits raw;
    raw.count = 1;
    for (std::size_t i = 0; i < 4; ++i) raw.factor[i] = {v[i]};
    return raw;
}

QualityMap random_map(std::mt19937_64& rng, std::size_t h, std::size_t w, float lo = 0.0f) {
    std::uniform_real_distribution<float> u(lo, 1.0f);
    QualityMap m(h, w);
    for (auto& v : m.values) v = u(rng);
    return m;
}

std::string cask_invariants(Check& c) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0), a(0.05, 1.0);
    for (int trial = 0; trial < kPropertyCases; ++trial) {
        PenaltyThresholds t;
        for (auto& x : t.alpha) x = a(rng);
        std::array<double, 4> v{u(rng), u(rng), u(rng), u(rng)};
        const double base = cask_combine(column(v), t)[0];
        auto up = v;
        const auto i = static_cast<std::size_t>(trial % 4);
        up[i] += (1.0 - up[i]) * u(rng);
        c.expect(cask_combine(column(up), t)[0] >= base, "monotonicity");
        c.expect(base <= v[0], "penalty bound");
        auto clear = v;
        for (std::size_t k = 1; k < 4; ++k) clear[k] = t.alpha[k - 1] + (1.0 - t.alpha[k - 1]) * u(rng);
        c.expect(cask_combine(column(clear), t)[0] == clear[0], "no-penalty identity");
    }
    return std::to_string(kPropertyCases) + " cases";
}

std::string softmax_and_merge_invariants(Check& c) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < kPropertyCases; ++trial) {
        const std::size_t d = 2 + static_cast<std::size_t>(trial % 15);
        const auto tokens = test::random_tensor(rng, 5, d);
        const auto emb = test::random_tensor(rng, 2, d);
        const auto x = two_way_softmax(tokens, emb.row(0), emb.row(1));
        const auto y = two_way_softmax(tokens, emb.row(1), emb.row(0));
        for (std::size_t k = 0; k < x.size(); ++k) c.expect(std::abs(x[k] + y[k] - 1.0) <= 1e-6, "complement");
    }
    for (int trial = 0; trial < kPropertyCases; ++trial) {
        const std::size_t h = 1 + static_cast<std::size_t>(trial % 5), w = 1 + static_cast<std::size_t>(trial % 6);
        std::map<int, QualityMap> maps;
        std::vector<DefectRecord> defects;
        for (int j = 1; j <= 1 + trial % 4; ++j) {
            maps[j] = random_map(rng, h, w, 0.01f);
            defects.push_back({j, j % 2 ? DefectKind::AdjUnmatched : DefectKind::NounUnmatched, j});
        }
        const auto a = merge_alignment_map(defects, maps, h, w);
        std::shuffle(defects.begin(), defects.end(), rng);
        const auto b = merge_alignment_map(defects, maps, h, w);
        for (std::size_t i = 0; i < a.map.values.size(); ++i)
            c.expect(std::abs(a.map.values[i] - b.map.values[i]) <= 1e-6f, "merge commutativity");
    }
    return std::to_string(kPropertyCases) + " cases each";
}

std::string mask_invariants(Check& c) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < kPropertyCases; ++trial) {
        const std::size_t h = 2 + static_cast<std::size_t>(trial % 4), w = 2 + static_cast<std::size_t>(trial % 3);
        auto p = random_map(rng, h, w);
        const auto a = random_map(rng, h, w);
        const bool fired = trial % 2 == 0;
        const double tau = 0.001 + 0.999 * u(rng);
        const auto mask = build_mask(p, a, fired, tau);

        QualityMap again(h, w);
        for (std::size_t i = 0; i < mask.pixels.size(); ++i) again.values[i] = mask.pixels[i];
        c.expect(binarize(again, tau) == mask, "idempotence");

        // lower one pixel while keeping min(P) and max(P) in place
        const auto [lo, hi] = std::minmax_element(p.values.begin(), p.values.end());
        const float pmin = *lo;
        const auto argmax = static_cast<std::size_t>(hi - p.values.begin());
        auto k = static_cast<std::size_t>(rng() % p.values.size());
        if (k == argmax) k = (k + 1) % p.values.size();
        p.values[k] = static_cast<float>(pmin + (p.values[k] - pmin) * u(rng));
        const auto after = build_mask(p, a, fired, tau);
        for (std::size_t i = 0; i < mask.pixels.size(); ++i) c.expect(after.pixels[i] >= mask.pixels[i], "monotonicity");
    }
    return std::to_string(kPropertyCases) +
           " cases; monotonicity checked for decreases that keep min(P) and max(P) fixed, see README";
}

std::string parser_invariants(Check& c) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> size(1, 12);
    std::uniform_real_distribution<double> rate(0.0, 0.9);
    for (int trial = 0; trial < kPropertyCases; ++trial) {
        const auto tree = test::random_tree(rng, size(rng), rate(rng));
        const auto seg = analyze_prompt(tree);
        std::set<int> seen;
        std::size_t total = 0;
        for (const auto& [noun, members] : seg.phs) {
            for (int id : members) c.expect(seen.insert(id).second, "disjoint phrases");
            c.expect(std::find(members.begin(), members.end(), noun) != members.end(), "phrase holds its noun");
            total += members.size();
        }
        c.expect(total == tree.size(), "partition covers every token");
        for (int pn : seg.pns) {
            int x = pn;
            std::size_t steps = 0;
            while (seg.ans.at(x) != x && steps <= seg.pns.size()) {
                x = seg.ans.at(x);
                ++steps;
            }
            c.expect(steps <= seg.pns.size(), "ancestor chain terminates");
        }
    }
    return std::to_string(kPropertyCases) + " random trees";
}

std::string roundtrip_invariant(Check& c) {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::uint32_t> bits;
    std::uniform_int_distribution<std::uint32_t> dim(1, 24);
    for (int trial = 0; trial < kPropertyCases; ++trial) {
        const std::uint32_t dims[2] = {dim(rng), dim(rng)};
        std::vector<float> data(std::size_t{dims[0]} * dims[1]);
        for (auto& v : data) {
            float f;
            do f = std::bit_cast<float>(bits(rng)); while (!std::isfinite(f));
            v = f;
        }
        const auto back = decode_grt(encode_grt(dims, data));
        c.expect(back.data.size() == data.size() &&
                     std::memcmp(back.data.data(), data.data(), data.size() * sizeof(float)) == 0,
                 "bit-exact round trip");
    }
    return std::to_string(kPropertyCases) + " tensors";
}

// ---- determinism ----------------------------------------------------------

std::vector<std::string> plan_args(const fs::path& out) {
    const auto dir = test::fixture_dir() / "defect";
    return {"plan",
            "--image-tokens", (dir / "image_tokens.grt").string(),
            "--bank", (dir / "bank.grt").string(),
            "--phrase-embeds", (dir / "phrase_embeds.grt").string(),
            "--conllu", (dir / "prompt.conllu").string(),
            "--image", "image.png",
            "--out", out.string()};
}

std::string determinism(Check& c) {
    test::TempDir a, b;
    std::ostringstream sink;
    c.expect(run_cli(plan_args(a.path()), sink, sink) == 0, "first plan run");
    c.expect(run_cli(plan_args(b.path()), sink, sink) == 0, "second plan run");
    for (const char* f : {"plan.json", "stage1_mask.png", "stage2_mask.png"})
        c.expect(test::read_text(a / f) == test::read_text(b / f), std::string(f) + " identical across runs");

    // committed golden output guards against platform drift
    const auto golden = test::fixture_dir() / "golden";
    c.expect(test::read_text(a / "plan.json") == test::read_text(golden / "plan.json"), "plan.json matches golden");
    for (const char* f : {"stage1_mask.png", "stage2_mask.png"}) {
        const auto got = read_gray_png(a / f);
        const auto want = read_gray_png(golden / f);
        c.expect(got.height == want.height && got.width == want.width && got.pixels == want.pixels,
                 std::string(f) + " pixels match golden");
    }
    const auto mask = read_gray_png(a / "stage1_mask.png");
    const auto on = std::count(mask.pixels.begin(), mask.pixels.end(), std::uint8_t{255});
    return "plan.json and masks byte-identical over two runs; golden match; stage 1 mask " + std::to_string(on) + "/" +
           std::to_string(mask.pixels.size()) + " px";
}

// ---- defect taxonomy ------------------------------------------------------

std::string defect_taxonomy(Check& c) {
    struct Case {
        const char* bundle;
        std::vector<DefectRecord> want;
    };
    const std::vector<Case> cases{
        {"noun", {{7, DefectKind::NounUnmatched, 3}}},
        {"defect", {{3, DefectKind::AdjUnmatched, 3}, {7, DefectKind::NounUnmatched, 3}}},
        {"clean", {}},
    };
    std::set<std::string> outcomes;
    for (const auto& cs : cases) {
        const auto dir = test::fixture_dir() / cs.bundle;
        const auto tokens = load_tensor(dir / "image_tokens.grt");
        const auto embeds = load_phrase_embeddings(dir / "phrase_embeds.grt", dir / "phrase_embeds.json");
        const auto tree = parse_conllu(test::read_text(dir / "prompt.conllu"));
        const auto r = compute_aq(tokens, tree, embeds, AlignmentThresholds{}, 32, 32);
        c.expect(r.defects == cs.want, std::string(cs.bundle) + " defect records");
        c.expect(r.merged.fired == !cs.want.empty(), std::string(cs.bundle) + " fired flag");

        // the oracle's classification of the same bundle agrees
        const auto expected = test::read_json(dir / "expected.json");
        std::vector<DefectRecord> oracle;
        for (const auto& ph : expected.at("phrases")) {
            if (ph.at("kind").is_null()) continue;
            oracle.push_back({ph.at("noun_id").get<int>(),
                              ph.at("kind") == "noun_unmatched" ? DefectKind::NounUnmatched : DefectKind::AdjUnmatched,
                              ph.at("target").get<int>()});
        }
        c.expect(oracle == cs.want, std::string(cs.bundle) + " oracle classification");
        for (const auto& d : r.defects) outcomes.insert(std::string(to_string(d.kind)));
        if (r.defects.empty()) outcomes.insert("none");
    }
    c.expect(outcomes.size() == 3, "all three outcomes covered");
    return "noun_unmatched, adj_unmatched and no-defect bundles";
}

}  // namespace

int main() {
    std::cout << "qualmap acceptance\n";
    report("oracle equivalence: attention, raw logits, cask, two-way softmax, alignment score", oracle_equivalence);
    report("phrase ancestors match exhaustive governor-chain search", ancestor_equivalence);
    report("structural constants: bank 4 x 2 x 512, default 20 steps split 10/10", structural_constants);
    report("invariants: cask monotonicity, penalty bound, no-penalty identity", cask_invariants);
    report("invariants: two-way softmax complement, merge commutativity", softmax_and_merge_invariants);
    report("invariants: mask idempotence and monotonicity", mask_invariants);
    report("invariants: phrase partition and acyclic ancestors", parser_invariants);
    report("invariants: GRT round trip is bit-exact", roundtrip_invariant);
    report("determinism: plan output byte-identical and equal to golden", determinism);
    report("defect taxonomy: exact records for all three outcomes", defect_taxonomy);
    std::cout << (g_failed == 0 ? "all criteria passed\n" : std::to_string(g_failed) + " criteria failed\n");
    return g_failed == 0 ? 0 : 1;
}
