#include <doctest.h>

#include <cstdlib>
#include <random>

#include "fixtures.hpp"
#include "golden.hpp"
#include "xfkt/error.hpp"
#include "xfkt/prompting.hpp"

using namespace xfkt;

namespace {

struct Chain {
    std::vector<InteractionRecord> shots;
    std::vector<KnowledgeState> states;
    std::vector<Interpretation> interps;
    PredictionTarget target;
};

Chain alice_chain() {
    const auto ds = fixtures::small_log();
    const auto& recs = fixtures::history(*ds, "alice").records;
    Chain c;
    c.shots.assign(recs.begin(), recs.begin() + 3);
    for (std::size_t i = 0; i < c.shots.size(); ++i) {
        KnowledgeState s;
        for (const auto& cid : ds->exercise(c.shots[i].exercise).concept_ids) {
            s.per_concept[cid] = static_cast<MasteryLevel>(i % 3);
        }
        c.states.push_back(s);
        c.interps.push_back(Interpretation{i + 1, "Interpretation of record " + std::to_string(i + 1) + ".", false});
    }
    c.target = PredictionTarget{recs.back()};
    return c;
}

void check_golden(const std::string& name, const std::string& text) {
    const auto path = fixtures::golden_dir() / name;
    if (std::getenv("XFKT_UPDATE_GOLDEN")) {
        fixtures::spit(path, text);
        return;
    }
    INFO("golden file " << name);
    CHECK(fixtures::slurp(path) == text);
}

ErrorKind kind_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an error");
    return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("prompting") {
    TEST_CASE("fill_template") {
        CHECK(fill_template("a {{x}} b {{y}}{{x}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 21");
        CHECK(kind_of([] { fill_template("{{nope}}", {}); }) == ErrorKind::InvalidArgument);
        CHECK(kind_of([] { fill_template("{{open", {}); }) == ErrorKind::InvalidArgument);
        CHECK(template_slots("{{a}} and {{b}}") == std::vector<std::string>{"a", "b"});
    }

    TEST_CASE("record fields follow the mode") {
        const auto ds = fixtures::small_log();
        const auto& rec = fixtures::history(*ds, "alice").records.at(0);
        const auto scant = render_record(rec, project_mode(ds, DatasetMode::Scant), 1);
        const auto sparse = render_record(rec, project_mode(ds, DatasetMode::Sparse), 1);
        const auto moderate = render_record(rec, project_mode(ds, DatasetMode::Moderate), 1);
        CHECK(scant.find("concept names:") == std::string::npos);
        CHECK(scant.find("exercise text:") == std::string::npos);
        CHECK(scant.find("timestamp:") == std::string::npos);
        CHECK(sparse.find("concept names:") != std::string::npos);
        CHECK(sparse.find("exercise text:") == std::string::npos);
        CHECK(moderate.find("exercise text:") != std::string::npos);
        CHECK(moderate.find("timestamp:") != std::string::npos);
        CHECK(moderate.find("duration:") != std::string::npos);
        // Field order is fixed.
        CHECK(moderate.find("exercise:") < moderate.find("concepts:"));
        CHECK(moderate.find("concept names:") < moderate.find("exercise text:"));
        CHECK(moderate.find("exercise text:") < moderate.find("correct:"));
        CHECK(moderate.find("correct:") < moderate.find("timestamp:"));
    }

    TEST_CASE("KSA prompt embeds exactly the prefix") {
        const auto c = alice_chain();
        const PromptBuilder pb(project_mode(fixtures::small_log(), DatasetMode::Sparse));
        const auto p = pb.ksa(std::span(c.shots).first(2), std::span(c.states).first(1), std::span(c.interps).first(1));
        CHECK(p.template_id == PromptKind::KSA);
        CHECK(p.text.find("[Record 1]") != std::string::npos);
        CHECK(p.text.find("[Record 2]") != std::string::npos);
        CHECK(p.text.find("[Record 3]") == std::string::npos);
        CHECK(p.text.find("Interpretation of record 1.") != std::string::npos);
        CHECK(p.text.find("Interpretation of record 2.") == std::string::npos);
        CHECK(p.digest.size() == 64);
        CHECK(kind_of([&] { pb.ksa(std::span(c.shots).first(2), {}, {}); }) == ErrorKind::InvalidArgument);
    }

    TEST_CASE("context window trims earlier records") {
        const auto c = alice_chain();
        const PromptBuilder pb(project_mode(fixtures::small_log(), DatasetMode::Scant), TemplateSet::defaults(),
                               PromptOptions{1});
        const auto p = pb.ksa(std::span(c.shots).first(3), std::span(c.states).first(2), std::span(c.interps).first(2));
        CHECK(p.text.find("[Record 1]") == std::string::npos);
        CHECK(p.text.find("[Record 3]") != std::string::npos);
    }

    TEST_CASE("PP target never shows the label") {
        auto c = alice_chain();
        const PromptBuilder pb(project_mode(fixtures::small_log(), DatasetMode::Moderate));
        const auto a = pb.pp(c.shots, c.states, c.interps, c.target);
        c.target.record.correct = !c.target.record.correct;
        const auto b = pb.pp(c.shots, c.states, c.interps, c.target);
        CHECK(a.text == b.text);
        CHECK(a.digest == b.digest);
        const auto block = pb.render_target(c.target);
        CHECK(block.find("correct:") == std::string::npos);
        CHECK(block.find("[Target]") == 0);
    }

    TEST_CASE("label-bearing slots are refused") {
        const auto c = alice_chain();
        for (const char* slot : {"target_correct", "label", "ground_truth"}) {
            auto t = TemplateSet::defaults();
            t.set(PromptKind::PP, std::string("Predict {{target}} knowing {{") + slot + "}}");
            const PromptBuilder pb(project_mode(fixtures::small_log(), DatasetMode::Scant), t);
            CHECK(kind_of([&] { pb.pp(c.shots, c.states, c.interps, c.target); }) == ErrorKind::LeakedLabel);
        }
    }

    TEST_CASE("label independence over randomized targets") {
        const auto ds = fixtures::small_log();
        std::mt19937_64 rng(11);
        for (auto mode : {DatasetMode::Scant, DatasetMode::Sparse, DatasetMode::Moderate}) {
            const PromptBuilder pb(project_mode(ds, mode));
            for (int i = 0; i < 200; ++i) {
                auto c = alice_chain();
                std::uniform_int_distribution<std::size_t> pick(0, 4);
                const auto& recs = fixtures::history(*ds, rng() % 2 ? "alice" : "bob").records;
                c.target.record = recs[pick(rng) % recs.size()];
                c.target.record.correct = true;
                const Prediction pred{rng() % 2 == 0, PredictionSource::Parsed, ""};
                const auto pp1 = pb.pp(c.shots, c.states, c.interps, c.target).text;
                const auto lpe1 = pb.lpe(c.shots, c.states, c.interps, c.target, pred).text;
                c.target.record.correct = false;
                CHECK(pp1 == pb.pp(c.shots, c.states, c.interps, c.target).text);
                CHECK(lpe1 == pb.lpe(c.shots, c.states, c.interps, c.target, pred).text);
            }
        }
    }

    TEST_CASE("golden prompts") {
        for (const auto& [name, text] : fixtures::golden_prompts()) check_golden(name, text);
        // Rendering twice gives the same bytes.
        CHECK(fixtures::golden_prompts() == fixtures::golden_prompts());
    }

    TEST_CASE("template directory overrides per mode") {
        fixtures::TempDir dir;
        fixtures::spit(dir / "pp.txt", "Base {{target}}");
        fixtures::spit(dir / "pp.moderate.txt", "Moderate {{target}}");
        const auto t = TemplateSet::load_dir(dir.path());
        CHECK(t.body(PromptKind::PP, DatasetMode::Scant) == "Base {{target}}");
        CHECK(t.body(PromptKind::PP, DatasetMode::Moderate) == "Moderate {{target}}");
        CHECK(t.body(PromptKind::KSA, DatasetMode::Scant) == TemplateSet::defaults().body(PromptKind::KSA, DatasetMode::Scant));
        CHECK(kind_of([] { TemplateSet::load_dir("/nonexistent/templates"); }) == ErrorKind::Io);
    }

    TEST_CASE("free-function builders match the class") {
        const auto c = alice_chain();
        const auto view = project_mode(fixtures::small_log(), DatasetMode::Sparse);
        const PromptBuilder pb(view);
        CHECK(build_pp_prompt(c.shots, c.states, c.interps, c.target, view).text ==
              pb.pp(c.shots, c.states, c.interps, c.target).text);
        CHECK(build_ksa_prompt(std::span(c.shots).first(1), {}, {}, view).text ==
              pb.ksa(std::span(c.shots).first(1), {}, {}).text);
    }
}
