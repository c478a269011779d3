#include "qualmap/refine_planner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "qualmap/error.hpp"

namespace qualmap {

using nlohmann::json;

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(pixels.begin(), pixels.end(), std::uint8_t{1}));
}

GrayImage BinaryMask::to_image() const {
    GrayImage img{height, width, {}};
    img.pixels.reserve(pixels.size());
    for (auto v : pixels) img.pixels.push_back(v ? 255 : 0);
    return img;
}

std::vector<float> min_max_normalize(std::span<const float> values) {
    std::vector<float> out(values.size(), 0.5f);
    if (values.empty()) return out;
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo)) return out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = static_cast<float>((static_cast<double>(values[i]) - lo) / (hi - lo));
    }
    return out;
}

QualityMap fuse_quality_maps(const QualityMap& perceptual, const QualityMap& alignment, bool fired) {
    if (perceptual.height != alignment.height || perceptual.width != alignment.width ||
        perceptual.values.size() != alignment.values.size()) {
        throw DimensionError("perceptual and alignment maps differ in size");
    }
    const auto p_norm = min_max_normalize(perceptual.values);
    const auto a_eff = fired ? min_max_normalize(alignment.values) : std::vector<float>(p_norm.size(), 0.0f);
    QualityMap fused(perceptual.height, perceptual.width);
    for (std::size_t i = 0; i < p_norm.size(); ++i) {
        const double m = 1.0 - static_cast<double>(p_norm[i]) + static_cast<double>(a_eff[i]);
        fused.values[i] = static_cast<float>(std::clamp(m, 0.0, 1.0));
    }
    return fused;
}

BinaryMask binarize(const QualityMap& map, double tau) {
    BinaryMask mask{map.height, map.width, std::vector<std::uint8_t>(map.values.size())};
    for (std::size_t i = 0; i < map.values.size(); ++i) mask.pixels[i] = map.values[i] >= tau ? 1 : 0;
    return mask;
}

BinaryMask build_mask(const QualityMap& perceptual, const QualityMap& alignment, bool fired, double tau) {
    return binarize(fuse_quality_maps(perceptual, alignment, fired), tau);
}

std::string_view to_string(StrengthOrientation o) {
    return o == StrengthOrientation::Literal ? "literal" : "inverted";
}

std::optional<StrengthOrientation> parse_orientation(std::string_view s) {
    if (s == "literal") return StrengthOrientation::Literal;
    if (s == "inverted") return StrengthOrientation::Inverted;
    return std::nullopt;
}

void PlannerConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau = " + std::to_string(tau) + " is outside [0, 1]");
    if (!(delta >= 0.0 && delta <= 1.0)) throw ConfigError("delta = " + std::to_string(delta) + " is outside [0, 1]");
    if (total_steps < 0) throw ConfigError("total steps must be non-negative");
    if (stage1_steps && (*stage1_steps < 0 || *stage1_steps > total_steps)) {
        throw ConfigError("stage 1 steps must lie in [0, total steps]");
    }
}

RefinePlan plan_refinement(double p, double a, BinaryMask mask, const EmphasizedPrompt& prompt,
                           const PlanSettings& settings, std::string image) {
    const PlannerConfig& cfg = settings.planner;
    cfg.validate();
    if (!(p >= 0.0 && p <= 1.0) || !(a >= 0.0 && a <= 1.0)) {
        throw DegenerateInputError("quality scores must lie in [0, 1] (p = " + std::to_string(p) +
                                   ", a = " + std::to_string(a) + ")");
    }
    const int n1 = cfg.stage1_steps.value_or(cfg.total_steps / 2);
    const int n2 = cfg.total_steps - n1;
    const double mean = (p + a) / 2.0;

    RefinePlan plan;
    plan.image = std::move(image);
    plan.p = p;
    plan.a = a;
    plan.settings = settings;

    StageSpec s1;
    s1.index = 1;
    s1.strength = cfg.orientation == StrengthOrientation::Literal ? mean : 1.0 - mean;
    s1.steps = n1;
    s1.mask_path = "stage1_mask.png";
    s1.prompt = prompt;
    const std::size_t h = mask.height;
    const std::size_t w = mask.width;
    s1.mask = std::move(mask);

    StageSpec s2;
    s2.index = 2;
    s2.strength = cfg.delta;
    s2.steps = n2;
    s2.mask = BinaryMask::filled(h, w, 1);
    s2.mask_path = "stage2_mask.png";
    s2.prompt = EmphasizedPrompt{prompt.original, {}};

    plan.stages.push_back(std::move(s1));
    plan.stages.push_back(std::move(s2));
    return plan;
}

double round_sig9(double v) {
    if (v == 0.0 || !std::isfinite(v)) return v;
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
    double out = 0.0;
    std::from_chars(buf, res.ptr, out);
    return out;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

std::string plan_to_json(const RefinePlan& plan) {
    const PlanSettings& s = plan.settings;
    json config;
    config["alpha"] = json::array();
    for (double a : s.alpha.alpha) config["alpha"].push_back(round_sig9(a));
    config["beta"] = round_sig9(s.alignment.beta);
    config["a_bound"] = round_sig9(s.alignment.a_bound);
    config["tau"] = round_sig9(s.planner.tau);
    config["delta"] = round_sig9(s.planner.delta);
    config["total_steps"] = s.planner.total_steps;
    config["orientation"] = std::string(to_string(s.planner.orientation));

    json stages = json::array();
    for (const StageSpec& st : plan.stages) {
        json emphasis = json::array();
        for (const Emphasis& e : st.prompt.emphasis) {
            emphasis.push_back({{"text", e.text}, {"weight", round_sig9(e.weight)}});
        }
        stages.push_back({{"index", st.index},
                          {"strength", round_sig9(st.strength)},
                          {"steps", st.steps},
                          {"mask_path", st.mask_path},
                          {"prompt", st.prompt.rendered()},
                          {"emphasis", std::move(emphasis)}});
    }

    char hash[17];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));

    json doc;
    doc["image"] = plan.image;
    doc["quality"] = {{"p", round_sig9(plan.p)}, {"a", round_sig9(plan.a)}};
    doc["stages"] = std::move(stages);
    doc["config"] = std::move(config);
    doc["config_hash"] = hash;
    doc["version"] = "1";
    return doc.dump(2) + "\n";
}

}  // namespace qualmap
