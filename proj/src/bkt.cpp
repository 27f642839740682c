#include "xfkt/bkt.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <json.hpp>

#include "xfkt/error.hpp"

namespace xfkt {

using nlohmann::json;

bool is_valid(const BktParams& p) {
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    return unit(p.p_init) && unit(p.p_learn) && unit(p.p_guess) && unit(p.p_slip);
}

ForwardTrace bkt_forward(const BktParams& params, std::span<const std::uint8_t> observations) {
    ForwardTrace trace;
    const std::size_t n = observations.size();
    trace.mastery.reserve(n + 1);
    trace.posterior.reserve(n);
    trace.correct.reserve(n + 1);

    double p = params.p_init;
    for (std::size_t t = 0; t <= n; ++t) {
        const double p_correct = p * (1.0 - params.p_slip) + (1.0 - p) * params.p_guess;
        trace.mastery.push_back(p);
        trace.correct.push_back(std::clamp(p_correct, 0.0, 1.0));
        if (t == n) break;

        double post = p;
        if (observations[t]) {
            if (p_correct > 0.0) post = p * (1.0 - params.p_slip) / p_correct;
        } else {
            if (p_correct < 1.0) post = p * params.p_slip / (1.0 - p_correct);
        }
        post = std::clamp(post, 0.0, 1.0);
        trace.posterior.push_back(post);
        p = std::clamp(post + (1.0 - post) * params.p_learn, 0.0, 1.0);
    }
    return trace;
}

double bkt_log_likelihood(const BktParams& params, std::span<const std::uint8_t> observations) {
    const auto trace = bkt_forward(params, observations);
    double ll = 0.0;
    for (std::size_t t = 0; t < observations.size(); ++t) {
        ll += std::log(observations[t] ? trace.correct[t] : 1.0 - trace.correct[t]);
    }
    return ll;
}

EStepStats& EStepStats::operator+=(const EStepStats& o) {
    log_likelihood += o.log_likelihood;
    init_learned += o.init_learned;
    learn_events += o.learn_events;
    unlearned_trans += o.unlearned_trans;
    unlearned += o.unlearned;
    unlearned_correct += o.unlearned_correct;
    learned += o.learned;
    learned_incorrect += o.learned_incorrect;
    return *this;
}

EStepStats e_step_sequence(const BktParams& params, std::span<const std::uint8_t> obs) {
    EStepStats st;
    const std::size_t n = obs.size();
    if (n == 0) return st;

    // State 0 = unlearned, 1 = learned. Scaled forward-backward.
    const double a[2][2] = {{1.0 - params.p_learn, params.p_learn}, {0.0, 1.0}};
    auto emit = [&](int state, std::uint8_t o) {
        if (state == 0) return o ? params.p_guess : 1.0 - params.p_guess;
        return o ? 1.0 - params.p_slip : params.p_slip;
    };

    std::vector<double> alpha(2 * n), beta(2 * n), scale(n);
    alpha[0] = (1.0 - params.p_init) * emit(0, obs[0]);
    alpha[1] = params.p_init * emit(1, obs[0]);
    scale[0] = alpha[0] + alpha[1];
    alpha[0] /= scale[0];
    alpha[1] /= scale[0];
    for (std::size_t t = 1; t < n; ++t) {
        for (int j = 0; j < 2; ++j) {
            alpha[2 * t + j] = (alpha[2 * (t - 1)] * a[0][j] + alpha[2 * (t - 1) + 1] * a[1][j]) * emit(j, obs[t]);
        }
        scale[t] = alpha[2 * t] + alpha[2 * t + 1];
        alpha[2 * t] /= scale[t];
        alpha[2 * t + 1] /= scale[t];
    }

    beta[2 * (n - 1)] = 1.0;
    beta[2 * (n - 1) + 1] = 1.0;
    for (std::size_t t = n - 1; t-- > 0;) {
        for (int i = 0; i < 2; ++i) {
            double s = 0.0;
            for (int j = 0; j < 2; ++j) s += a[i][j] * emit(j, obs[t + 1]) * beta[2 * (t + 1) + j];
            beta[2 * t + i] = s / scale[t + 1];
        }
    }

    for (std::size_t t = 0; t < n; ++t) {
        st.log_likelihood += std::log(scale[t]);
        const double g_u = alpha[2 * t] * beta[2 * t];
        const double g_l = alpha[2 * t + 1] * beta[2 * t + 1];
        if (t == 0) st.init_learned = g_l;
        st.unlearned += g_u;
        st.learned += g_l;
        if (obs[t]) st.unlearned_correct += g_u;
        else st.learned_incorrect += g_l;
        if (t + 1 < n) {
            st.unlearned_trans += g_u;
            st.learn_events += alpha[2 * t] * a[0][1] * emit(1, obs[t + 1]) * beta[2 * (t + 1) + 1] / scale[t + 1];
        }
    }
    return st;
}

namespace {

BktParams clamp_params(BktParams p, const EmOptions& opt) {
    const double lo = opt.prob_floor;
    const double hi = 1.0 - opt.prob_floor;
    p.p_init = std::clamp(p.p_init, lo, hi);
    p.p_learn = std::clamp(p.p_learn, lo, hi);
    p.p_guess = std::clamp(p.p_guess, lo, std::min(hi, opt.guess_slip_cap));
    p.p_slip = std::clamp(p.p_slip, lo, std::min(hi, opt.guess_slip_cap));
    return p;
}

// Each update maximises a concave Bernoulli term of the EM auxiliary function,
// so clamping onto the box is the constrained maximiser and the likelihood
// stays non-decreasing.
BktParams m_step(const BktParams& prev, const EStepStats& st, std::size_t n_sequences, const EmOptions& opt) {
    BktParams next = prev;
    if (n_sequences > 0) next.p_init = st.init_learned / static_cast<double>(n_sequences);
    if (st.unlearned_trans > 0.0) next.p_learn = st.learn_events / st.unlearned_trans;
    if (st.unlearned > 0.0) next.p_guess = st.unlearned_correct / st.unlearned;
    if (st.learned > 0.0) next.p_slip = st.learned_incorrect / st.learned;
    return clamp_params(next, opt);
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::vector<BktParams> starting_points(const EmOptions& opt) {
    std::vector<BktParams> starts{kDefaultBktParams};
    std::mt19937_64 rng(splitmix64(opt.seed));
    std::uniform_real_distribution<double> init(0.05, 0.95), learn(0.01, 0.5), noise(0.01, 0.4);
    for (int r = 0; r < opt.restarts; ++r) {
        BktParams p;
        p.p_init = init(rng);
        p.p_learn = learn(rng);
        p.p_guess = noise(rng);
        p.p_slip = noise(rng);
        starts.push_back(p);
    }
    for (auto& s : starts) s = clamp_params(s, opt);
    return starts;
}

template <class EStep>
FitResult run_em(const std::vector<Observations>& sequences, const EmOptions& opt, EStep&& estep) {
    FitResult best;
    bool have_best = false;
    for (const auto& start : starting_points(opt)) {
        FitResult fit;
        BktParams params = start;
        for (int k = 0;; ++k) {
            const EStepStats st = estep(params, sequences);
            fit.ll_trace.push_back(st.log_likelihood);
            if (k > 0 && st.log_likelihood - fit.ll_trace[fit.ll_trace.size() - 2] < opt.tol) {
                fit.converged = true;
                break;
            }
            if (k == opt.max_iter) break;
            params = m_step(params, st, sequences.size(), opt);
            fit.iterations = k + 1;
        }
        fit.params = params;
        fit.log_likelihood = fit.ll_trace.back();
        if (!have_best || fit.log_likelihood > best.log_likelihood) {
            best = std::move(fit);
            have_best = true;
        }
    }
    return best;
}

}  // namespace

EStepStats e_step(const BktParams& params, const std::vector<Observations>& sequences) {
    std::vector<EStepStats> per_seq(sequences.size());
    const auto n = static_cast<std::ptrdiff_t>(sequences.size());
#pragma omp parallel for schedule(static) if (n > 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        per_seq[static_cast<std::size_t>(i)] = e_step_sequence(params, sequences[static_cast<std::size_t>(i)]);
    }
    EStepStats total;
    for (const auto& s : per_seq) total += s;
    return total;
}

FitResult fit_bkt_sequences(const std::vector<Observations>& sequences, const EmOptions& options) {
    return run_em(sequences, options, [](const BktParams& p, const std::vector<Observations>& s) { return xfkt::e_step(p, s); });
}

namespace serial {

EStepStats e_step(const BktParams& params, const std::vector<Observations>& sequences) {
    EStepStats total;
    for (const auto& seq : sequences) total += e_step_sequence(params, seq);
    return total;
}

FitResult fit_bkt_sequences(const std::vector<Observations>& sequences, const EmOptions& options) {
    return run_em(sequences, options, [](const BktParams& p, const std::vector<Observations>& s) { return serial::e_step(p, s); });
}

}  // namespace serial

ConceptSequences group_by_concept(const Dataset& dataset,
                                  const std::map<StudentId, std::vector<InteractionRecord>>& records) {
    ConceptSequences out;
    for (const auto& [sid, recs] : records) {
        std::map<ConceptId, Observations> per_concept;
        for (const auto& r : recs) {
            for (const auto& c : dataset.exercise(r.exercise).concept_ids) per_concept[c].push_back(r.correct ? 1 : 0);
        }
        for (auto& [c, obs] : per_concept) out[c].push_back(std::move(obs));
    }
    return out;
}

BktModel fit_bkt(const ConceptSequences& sequences, const std::set<ConceptId>& concepts, const EmOptions& options) {
    BktModel model;
    std::vector<ConceptId> todo;
    for (const auto& c : concepts) {
        auto it = sequences.find(c);
        if (it == sequences.end() || it->second.empty()) {
            model.params[c] = kDefaultBktParams;
            model.defaulted.insert(c);
        } else {
            todo.push_back(c);
        }
    }

    std::vector<FitResult> fits(todo.size());
    const auto n = static_cast<std::ptrdiff_t>(todo.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        EmOptions opt = options;
        opt.seed = splitmix64(options.seed ^ (0x51ed270b27e4a1c3ULL * (idx + 1)));
        fits[idx] = fit_bkt_sequences(sequences.at(todo[idx]), opt);
    }
    for (std::size_t i = 0; i < todo.size(); ++i) {
        model.params[todo[i]] = fits[i].params;
        model.fits[todo[i]] = std::move(fits[i]);
    }
    return model;
}

BktPrediction bkt_predict(const BktModel& model, const Dataset& dataset,
                          std::span<const InteractionRecord> history_prefix, const ExerciseId& target) {
    const auto& ex = dataset.exercise(target);
    BktPrediction out;
    double sum = 0.0;
    for (const auto& c : ex.concept_ids) {
        BktParams params = kDefaultBktParams;
        auto it = model.params.find(c);
        if (it == model.params.end() || model.defaulted.contains(c)) out.defaulted.push_back(c);
        if (it != model.params.end()) params = it->second;

        Observations obs;
        for (const auto& r : history_prefix) {
            const auto& ids = dataset.exercise(r.exercise).concept_ids;
            if (std::find(ids.begin(), ids.end(), c) != ids.end()) obs.push_back(r.correct ? 1 : 0);
        }
        sum += bkt_forward(params, obs).correct.back();
    }
    out.probability = sum / static_cast<double>(ex.concept_ids.size());
    out.value = out.probability >= 0.5;
    return out;
}

bool majority_predict(std::span<const InteractionRecord> train) {
    if (train.empty()) throw Error(ErrorKind::EmptyInput, "majority baseline needs training records");
    const auto correct = std::count_if(train.begin(), train.end(), [](const auto& r) { return r.correct; });
    return 2 * static_cast<std::size_t>(correct) >= train.size();
}

std::string export_bkt_params(const BktModel& model) {
    json doc;
    doc["default"] = {{"p_L0", kDefaultBktParams.p_init}, {"p_T", kDefaultBktParams.p_learn},
                      {"p_G", kDefaultBktParams.p_guess}, {"p_S", kDefaultBktParams.p_slip}};
    json concepts = json::object();
    for (const auto& [c, p] : model.params) {
        json entry = {{"p_L0", p.p_init}, {"p_T", p.p_learn}, {"p_G", p.p_guess}, {"p_S", p.p_slip},
                      {"defaulted", model.defaulted.contains(c)}};
        if (auto it = model.fits.find(c); it != model.fits.end()) {
            entry["log_likelihood"] = it->second.log_likelihood;
            entry["iterations"] = it->second.iterations;
            entry["converged"] = it->second.converged;
        }
        concepts[c.value] = std::move(entry);
    }
    doc["concepts"] = std::move(concepts);
    return doc.dump(2) + "\n";
}

BktModel import_bkt_params(const std::string& text) {
    BktModel model;
    json doc;
    try {
        doc = json::parse(text);
        for (const auto& [key, v] : doc.at("concepts").items()) {
            BktParams p{v.at("p_L0").get<double>(), v.at("p_T").get<double>(), v.at("p_G").get<double>(),
                        v.at("p_S").get<double>()};
            if (!is_valid(p)) throw Error(ErrorKind::InvalidArgument, "parameters of '" + key + "' outside [0,1]");
            ConceptId cid{key};
            model.params[cid] = p;
            if (v.value("defaulted", false)) model.defaulted.insert(cid);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidArgument, std::string("malformed BKT parameter document: ") + e.what());
    }
    return model;
}

}  // namespace xfkt
