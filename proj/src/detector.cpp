#include "diamond/detector.hpp"

#include <cmath>

#include "json.hpp"

namespace diamond {

using nlohmann::json;

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Member mask and (optionally) its diagonal/rank-one derivative data.
//
// A radial member scores squared distance to its center: inside the radius
// the probability tends to 1. The argument is scaled by 1/(2r) so the 0.5
// level set sits exactly on the radius and `sharpness` is the slope in
// distance units at the boundary.
struct MemberEval {
    bool whole_point = false;  // constant mask, gradient dense over cells
    Vec probs;                 // per cell (size 1 when whole_point)
    Vec dprob;                 // d prob / d cell-value (same layout)
};

MemberEval eval_radial_member(const Grid& decoded, const Vec& center, double radius, double sharp,
                              bool deviation_mode) {
    MemberEval m;
    if (center.size() == 1) {
        m.whole_point = false;
        m.probs.resize(decoded.size());
        m.dprob.resize(decoded.size());
        for (std::size_t q = 0; q < decoded.size(); ++q) {
            const double dv = decoded.v[q] - center[0];
            const double d2 = dv * dv;
            const double z = deviation_mode ? sharp * (d2 - radius * radius) / (2.0 * radius)
                                            : sharp * (radius * radius - d2) / (2.0 * radius);
            const double p = sigmoid(z);
            m.probs[q] = p;
            const double sgn = deviation_mode ? 1.0 : -1.0;
            m.dprob[q] = p * (1.0 - p) * sgn * (sharp / radius) * dv;
        }
        return m;
    }
    if (center.size() != decoded.size()) {
        throw std::invalid_argument("eval_mask: detector center dimension does not match decoded grid");
    }
    m.whole_point = true;
    double d2 = 0.0;
    for (std::size_t q = 0; q < decoded.size(); ++q) {
        const double dv = decoded.v[q] - center[q];
        d2 += dv * dv;
    }
    const double z = deviation_mode ? sharp * (d2 - radius * radius) / (2.0 * radius)
                                    : sharp * (radius * radius - d2) / (2.0 * radius);
    const double p = sigmoid(z);
    m.probs.assign(1, p);
    const double sgn = deviation_mode ? 1.0 : -1.0;
    m.dprob.resize(decoded.size());
    for (std::size_t q = 0; q < decoded.size(); ++q) {
        m.dprob[q] = p * (1.0 - p) * sgn * (sharp / radius) * (decoded.v[q] - center[q]);
    }
    return m;
}

std::vector<MemberEval> eval_members(const Grid& decoded, const DetectorSpec& spec) {
    std::vector<MemberEval> members;
    members.reserve(spec.centers.size());
    const bool deviation = spec.kind == DetectorSpec::Kind::patch;
    for (std::size_t k = 0; k < spec.centers.size(); ++k) {
        members.push_back(eval_radial_member(decoded, spec.centers[k], spec.radii[k],
                                             spec.member_sharpness(k), deviation));
    }
    return members;
}

}  // namespace

double DetectorSpec::member_sharpness(std::size_t k) const {
    return sharpness > 0.0 ? sharpness : 10.0 / radii[k];
}

void DetectorSpec::validate() const {
    if (centers.empty() || centers.size() != radii.size()) {
        throw std::invalid_argument("DetectorSpec: centers and radii must be non-empty and parallel");
    }
    for (const Vec& c : centers) {
        if (c.empty() || !all_finite(c)) throw std::invalid_argument("DetectorSpec: bad center");
    }
    for (double r : radii) {
        if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("DetectorSpec: radius must be positive");
    }
    if (sharpness < 0.0 || !std::isfinite(sharpness)) {
        throw std::invalid_argument("DetectorSpec: sharpness must be >= 0");
    }
    if (kind == Kind::patch) {
        if (centers.size() != 1 || centers[0].size() != 1) {
            throw std::invalid_argument("DetectorSpec: patch kind takes one scalar reference value");
        }
    }
    if (kind == Kind::composite) {
        if (weights.size() != centers.size()) {
            throw std::invalid_argument("DetectorSpec: composite needs one weight per member");
        }
        double sum = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("DetectorSpec: negative composite weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-12) {
            throw std::invalid_argument("DetectorSpec: composite weights must sum to 1");
        }
    }
}

ArtifactMask eval_mask(const Grid& decoded, const DetectorSpec& spec) {
    spec.validate();
    if (decoded.size() == 0) throw std::invalid_argument("eval_mask: empty decoded grid");
    const std::vector<MemberEval> members = eval_members(decoded, spec);

    ArtifactMask mask(decoded.rows, decoded.cols);
    for (std::size_t q = 0; q < decoded.size(); ++q) {
        double p;
        if (spec.kind == DetectorSpec::Kind::composite) {
            p = 0.0;
            for (std::size_t k = 0; k < members.size(); ++k) {
                p += spec.weights[k] * (members[k].whole_point ? members[k].probs[0] : members[k].probs[q]);
            }
        } else {
            // smooth OR over members
            double keep = 1.0;
            for (const auto& m : members) keep *= 1.0 - (m.whole_point ? m.probs[0] : m.probs[q]);
            p = 1.0 - keep;
        }
        mask.v[q] = p;
    }
    return mask;
}

std::vector<std::uint8_t> binarize(const ArtifactMask& mask, double threshold) {
    std::vector<std::uint8_t> out(mask.size());
    for (std::size_t q = 0; q < mask.size(); ++q) out[q] = mask.v[q] >= threshold ? 1 : 0;
    return out;
}

Grid mask_jacobian_action(const Grid& decoded, const DetectorSpec& spec, const Grid& cotangent) {
    spec.validate();
    check_same_shape(decoded, cotangent, "mask_jacobian_action");
    const std::vector<MemberEval> members = eval_members(decoded, spec);

    Grid out(decoded.rows, decoded.cols);
    if (spec.kind == DetectorSpec::Kind::composite) {
        for (std::size_t k = 0; k < members.size(); ++k) {
            const auto& m = members[k];
            const double wk = spec.weights[k];
            if (m.whole_point) {
                // every cell shares the member probability: J_k = ones * dprob^T
                double cot_sum = 0.0;
                for (double c : cotangent.v) cot_sum += c;
                for (std::size_t q = 0; q < out.size(); ++q) out.v[q] += wk * cot_sum * m.dprob[q];
            } else {
                for (std::size_t q = 0; q < out.size(); ++q) out.v[q] += wk * cotangent.v[q] * m.dprob[q];
            }
        }
        return out;
    }

    // smooth OR: dp/dy = sum_k prod_{l != k} (1 - p_l) * dp_k/dy, per cell
    for (std::size_t k = 0; k < members.size(); ++k) {
        const auto& m = members[k];
        if (m.whole_point) {
            double weighted_cot = 0.0;
            for (std::size_t q = 0; q < out.size(); ++q) {
                double keep = 1.0;
                for (std::size_t l = 0; l < members.size(); ++l) {
                    if (l == k) continue;
                    keep *= 1.0 - (members[l].whole_point ? members[l].probs[0] : members[l].probs[q]);
                }
                weighted_cot += cotangent.v[q] * keep;
            }
            for (std::size_t q = 0; q < out.size(); ++q) out.v[q] += weighted_cot * m.dprob[q];
        } else {
            for (std::size_t q = 0; q < out.size(); ++q) {
                double keep = 1.0;
                for (std::size_t l = 0; l < members.size(); ++l) {
                    if (l == k) continue;
                    keep *= 1.0 - (members[l].whole_point ? members[l].probs[0] : members[l].probs[q]);
                }
                out.v[q] += cotangent.v[q] * keep * m.dprob[q];
            }
        }
    }
    return out;
}

std::string DetectorSpec::to_json() const {
    json j;
    switch (kind) {
        case Kind::radial: j["kind"] = "radial"; break;
        case Kind::patch: j["kind"] = "patch"; break;
        case Kind::composite: j["kind"] = "composite"; break;
    }
    j["centers"] = centers;
    j["radii"] = radii;
    j["sharpness"] = sharpness;
    if (kind == Kind::composite) j["weights"] = weights;
    return j.dump(2);
}

DetectorSpec DetectorSpec::from_json(const std::string& text) {
    const json j = json::parse(text);
    DetectorSpec s;
    const std::string k = j.at("kind").get<std::string>();
    if (k == "radial") s.kind = Kind::radial;
    else if (k == "patch") s.kind = Kind::patch;
    else if (k == "composite") s.kind = Kind::composite;
    else throw std::invalid_argument("DetectorSpec: unknown kind " + k);
    s.centers = j.at("centers").get<std::vector<Vec>>();
    s.radii = j.at("radii").get<Vec>();
    if (j.contains("sharpness")) s.sharpness = j.at("sharpness").get<double>();
    if (j.contains("weights")) s.weights = j.at("weights").get<Vec>();
    s.validate();
    return s;
}

}  // namespace diamond
