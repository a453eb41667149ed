// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "icdbert/corpus.hpp"
#include "icdbert/csv.hpp"
#include "icdbert/error.hpp"
#include "icdbert/rng.hpp"

namespace icdbert {

namespace {

constexpr std::array<std::string_view, 60> kFiller = {
    "patient", "admitted", "with", "history", "of", "presented", "denies", "pain", "chest", "stable",
    "afebrile", "vitals", "noted", "plan", "continue", "monitor", "discharged", "home", "follow", "up",
    "clinic", "medications", "reviewed", "mild", "acute", "chronic", "no", "and", "the", "was",
    "on", "exam", "lungs", "clear", "heart", "regular", "abdomen", "soft", "bp", "hr",
    "given", "iv", "fluids", "status", "post", "day", "icu", "transferred", "floor", "labs",
    "within", "normal", "limits", "pt", "states", "feels", "better", "today", "family", "meeting"};

constexpr std::array<std::string_view, 20> kSyllables = {"ka", "le", "mo", "ri", "tu", "sa", "ve", "no",
                                                         "pi", "du", "ga", "he", "lo", "mi", "ra", "se",
                                                         "to", "vu", "ze", "bo"};

constexpr std::array<std::string_view, 4> kCategories = {"Discharge summary", "Nursing", "Radiology",
                                                         "Physician"};

constexpr std::array<std::string_view, 5> kSpecials = {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"};

std::string make_keyword(std::size_t index, CodeKind kind) {
    std::string word;
    std::size_t x = index + 21;  // at least two syllables
    while (x > 0) {
        word += kSyllables[x % kSyllables.size()];
        x /= kSyllables.size();
    }
    word += kind == CodeKind::diagnosis ? "osis" : "ectomy";
    return word;
}

std::string make_code(std::size_t index, CodeKind kind) {
    if (kind == CodeKind::diagnosis) {
        return fmt::format("{:03d}.{}", 1 + (index * 53) % 990, index / 990);
    }
    return fmt::format("{:02d}.{:02d}", 1 + index % 99, index / 99);
}

/// Draws `count` distinct ranks from a Zipf(s) law over [0, weights.size()).
std::vector<std::size_t> draw_zipf_distinct(Rng& rng, const std::vector<double>& cumulative, std::size_t count) {
    std::set<std::size_t> chosen;
    const double total = cumulative.back();
    count = std::min(count, cumulative.size());
    while (chosen.size() < count) {
        const double u = rng.uniform() * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        chosen.insert(std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1));
    }
    return {chosen.begin(), chosen.end()};
}

std::string filler_sentence(Rng& rng, std::size_t min_words, std::size_t max_words,
                            const std::vector<std::string>& keywords) {
    const auto n = static_cast<std::size_t>(rng.between(static_cast<std::int64_t>(min_words),
                                                        static_cast<std::int64_t>(max_words)));
    std::vector<std::string> words;
    for (std::size_t i = 0; i < n; ++i) words.emplace_back(kFiller[rng.below(kFiller.size())]);
    for (const auto& kw : keywords) {
        const auto pos = rng.below(words.size() + 1);
        words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), kw);
    }
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

std::string compose_note(Rng& rng, std::vector<std::string> keywords) {
    rng.shuffle(keywords.begin(), keywords.end());
    std::vector<std::string> lines;
    if (rng.uniform() < 0.5) {
        lines.push_back(fmt::format("Admission Date: [**{}-{}-{}**]", 2100 + rng.below(80), 1 + rng.below(12),
                                    1 + rng.below(28)));
    }
    const auto n_sentences = static_cast<std::size_t>(rng.between(2, 3));
    std::vector<std::vector<std::string>> slots(n_sentences);
    for (auto& kw : keywords) slots[rng.below(n_sentences)].push_back(kw);
    for (std::size_t s = 0; s < n_sentences; ++s) {
        std::string sentence = filler_sentence(rng, 3, 6, slots[s]);
        sentence += rng.uniform() < 0.3 ? ", stable." : ".";
        lines.push_back(std::move(sentence));
    }
    switch (rng.below(3)) {
        case 0:
            lines.push_back(fmt::format("BP {}/{}, HR {}.", 90 + rng.below(60), 50 + rng.below(40), 55 + rng.below(50)));
            break;
        case 1:
            lines.emplace_back("Pt states \"feels better\".");
            break;
        default:
            break;
    }
    std::string text;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i) text += '\n';
        text += lines[i];
    }
    return text;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& line : lines) out << line << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

SyntheticCorpus synthesize_corpus(const SyntheticCorpusOptions& options) {
    if (options.n_admissions < 1) throw ConfigError("n_admissions must be >= 1");
    if (options.n_codes < 1) throw ConfigError("n_codes must be >= 1");
    if (options.n_codes > 9000) throw ConfigError("n_codes must be <= 9000");
    if (!(options.zipf_exponent >= 0.0)) throw ConfigError("zipf_exponent must be >= 0");

    SyntheticCorpus corpus;
    for (CodeKind kind : {CodeKind::diagnosis, CodeKind::procedure}) {
        for (std::size_t i = 0; i < options.n_codes; ++i) {
            auto keyword = make_keyword(kind == CodeKind::diagnosis ? i : options.n_codes + i, kind);
            std::string title = keyword;
            title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
            title += kind == CodeKind::diagnosis ? " NEC" : " proc";
            corpus.codes.push_back({make_code(i, kind), kind, std::move(title)});
            corpus.keywords.push_back(std::move(keyword));
        }
    }

    std::vector<double> cumulative(options.n_codes);
    double acc = 0.0;
    for (std::size_t r = 0; r < options.n_codes; ++r) {
        acc += 1.0 / std::pow(static_cast<double>(r + 1), options.zipf_exponent);
        cumulative[r] = acc;
    }

    Rng rng(derive_seed(options.seed, "synthetic-corpus"));
    for (std::size_t a = 0; a < options.n_admissions; ++a) {
        const AdmissionId hadm = 100001 + static_cast<AdmissionId>(a);
        const std::int64_t subject = 10001 + static_cast<std::int64_t>(a / 2);

        std::vector<std::string> keywords;
        const auto diag = draw_zipf_distinct(rng, cumulative, static_cast<std::size_t>(rng.between(1, 4)));
        const auto proc = draw_zipf_distinct(rng, cumulative, static_cast<std::size_t>(rng.between(1, 3)));
        std::int64_t seq = 1;
        for (auto r : diag) {
            corpus.diagnoses.push_back({hadm, corpus.codes[r].code, CodeKind::diagnosis, seq++});
            // MIMIC code tables occasionally repeat a code within one admission.
            if (rng.uniform() < 0.05) {
                corpus.diagnoses.push_back({hadm, corpus.codes[r].code, CodeKind::diagnosis, seq++});
            }
            keywords.push_back(corpus.keywords[r]);
        }
        seq = 1;
        for (auto r : proc) {
            corpus.procedures.push_back({hadm, corpus.codes[options.n_codes + r].code, CodeKind::procedure, seq++});
            keywords.push_back(corpus.keywords[options.n_codes + r]);
        }

        const auto n_notes = rng.between(1, 3);
        for (std::int64_t n = 0; n < n_notes; ++n) {
            NoteEvent note;
            note.admission_id = hadm;
            note.subject_id = subject;
            note.category = std::string(kCategories[rng.below(kCategories.size())]);
            note.text = compose_note(rng, keywords);
            corpus.notes.push_back(std::move(note));
        }
    }
    return corpus;
}

std::vector<std::string> synthetic_vocabulary(const SyntheticCorpus& corpus) {
    std::vector<std::string> vocab(kSpecials.begin(), kSpecials.end());
    for (char c : std::string_view(".,:;/-()\"'%+#*[]")) vocab.emplace_back(1, c);
    for (char d = '0'; d <= '9'; ++d) vocab.emplace_back(1, d);
    for (char d = '0'; d <= '9'; ++d) vocab.push_back(std::string("##") + d);
    vocab.emplace_back("deid");
    vocab.emplace_back("admission");
    vocab.emplace_back("date");
    for (auto w : kFiller) vocab.emplace_back(w);
    for (auto piece : {"##s", "##ed", "##ing", "##ly"}) vocab.emplace_back(piece);
    for (const auto& kw : corpus.keywords) vocab.push_back(kw);
    return vocab;
}

SyntheticCorpus generate_synthetic_corpus(const SyntheticCorpusOptions& options,
                                          const std::filesystem::path& out_dir) {
    SyntheticCorpus corpus = synthesize_corpus(options);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

    auto open = [&](std::string_view name) {
        std::ofstream out(out_dir / name, std::ios::binary);
        if (!out) throw IoError("cannot write " + (out_dir / name).string());
        return out;
    };

    {
        auto out = open(kNotesFile);
        csv::write_row(out, {"ROW_ID", "SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT"});
        std::size_t row_id = 1;
        for (const auto& n : corpus.notes) {
            csv::write_row(out, {std::to_string(row_id++), std::to_string(n.subject_id),
                                 std::to_string(n.admission_id), n.category, n.text});
        }
        if (!out) throw IoError("write failed: " + (out_dir / kNotesFile).string());
    }
    auto write_codes = [&](std::string_view name, const std::vector<CodeRecord>& records) {
        auto out = open(name);
        csv::write_row(out, {"ROW_ID", "SUBJECT_ID", "HADM_ID", "SEQ_NUM", "ICD9_CODE"});
        std::size_t row_id = 1;
        for (const auto& r : records) {
            const auto subject = 10001 + (r.admission_id - 100001) / 2;
            csv::write_row(out, {std::to_string(row_id++), std::to_string(subject), std::to_string(r.admission_id),
                                 std::to_string(r.seq_num), r.code});
        }
        if (!out) throw IoError("write failed: " + (out_dir / name).string());
    };
    write_codes(kDiagnosesFile, corpus.diagnoses);
    write_codes(kProceduresFile, corpus.procedures);

    write_lines(out_dir / kFixtureVocabFile, synthetic_vocabulary(corpus));
    write_lines(out_dir / kManifestFile,
                {fmt::format("seed={}", options.seed), fmt::format("n_admissions={}", options.n_admissions),
                 fmt::format("n_codes={}", options.n_codes), fmt::format("zipf_exponent={}", options.zipf_exponent),
                 fmt::format("{}={}", kNotesFile, corpus.notes.size()),
                 fmt::format("{}={}", kDiagnosesFile, corpus.diagnoses.size()),
                 fmt::format("{}={}", kProceduresFile, corpus.procedures.size()),
                 fmt::format("{}={}", kFixtureVocabFile, synthetic_vocabulary(corpus).size())});
    return corpus;
}

}  // namespace icdbert
