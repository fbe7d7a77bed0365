#include "ct/audit.hpp"

#include "ct/util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace ct {

using nlohmann::json;

std::vector<std::optional<BiasReport>> audit_bias_rows(const std::vector<ScenarioSample>& rows,
                                                       const BiasFilters& filters) {
    std::vector<std::optional<BiasReport>> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ScenarioSample& row = rows[i];
        if (row.subject.empty() || row.subject_char_span.empty()) continue;
        BiasReport report;
        if (!util::trim(row.prediction).empty()) {
            report.lexical = lexical_overlap(row.subject, row.prediction);
        }
        if (row.relation) {
            if (name_bias_applicable(relation_name(*row.relation))) {
                report.name = filters.name_bias(row.subject, row.prediction);
            }
            if (row.template_id >= 0) {
                FactQuery query;
                query.relation = *row.relation;
                query.template_id = row.template_id;
                query.subject = row.subject;
                query.prompt = row.prompt;
                query.subject_char_span = row.subject_char_span;
                Prediction top1;
                top1.token_text = row.prediction;
                top1.rank = row.prediction_rank;
                top1.probability = row.prediction_prob;
                report.prompt = filters.prompt_bias(query, top1);
            }
        }
        out[i] = std::move(report);
    }
    return out;
}

std::map<std::string, int> audit_bias(const std::vector<ScenarioSample>& rows,
                                      const BiasFilters& filters, int* skipped) {
    std::map<std::string, int> counts;
    int skipped_rows = 0;
    for (const auto& report : audit_bias_rows(rows, filters)) {
        if (!report) {
            ++skipped_rows;
            continue;
        }
        if (report->lexical) ++counts["lexical"];
        if (report->name) ++counts["name"];
        if (report->prompt) ++counts["prompt"];
        std::vector<std::string> combo;
        if (report->lexical) combo.push_back("lexical");
        if (report->name) combo.push_back("name");
        if (report->prompt) combo.push_back("prompt");
        if (combo.size() > 1) {
            std::string key;
            for (const std::string& k : combo) {
                if (!key.empty()) key += '+';
                key += k;
            }
            ++counts[key];
        }
        if (combo.empty()) ++counts["none"];
    }
    if (skipped) *skipped = skipped_rows;
    return counts;
}

TeAuditResult audit_total_effect(const std::vector<ScenarioSample>& rows,
                                 const WeightBundle& weights, const Tokenizer& tokenizer,
                                 const TeAuditOptions& options) {
    TeAuditResult result;
    result.te_norm_by_row.assign(rows.size(), std::numeric_limits<double>::quiet_NaN());

    // Tokenize every row once; unusable rows are skipped.
    struct RowTok {
        std::vector<int> ids;
        TokenSpan subject;
        int traced;
        bool ok = false;
    };
    std::vector<RowTok> toks(rows.size());
    std::vector<std::vector<int>> subject_tokens;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const ScenarioSample& row = rows[i];
        if (row.prompt.empty() || row.subject.empty()) continue;
        try {
            const SubjectTokenization st =
                tokenize_with_subject(tokenizer, row.prompt, row.subject_char_span);
            RowTok rt;
            rt.ids = st.tokens.token_ids;
            rt.subject = st.subject_span;
            rt.traced = row.traced_token >= 0 ? row.traced_token
                                              : tokenizer.first_token_id(row.prediction);
            if (rt.traced < 0 || rt.traced >= weights.config.vocab_size) continue;
            if (rt.subject.size() >= static_cast<int>(rt.ids.size())) continue;
            rt.ok = true;
            std::vector<int> subject_ids(rt.ids.begin(), rt.ids.begin() + rt.subject.end);
            subject_tokens.push_back(std::move(subject_ids));
            toks[i] = std::move(rt);
        } catch (const std::exception&) {
            continue;  // row tokenization failure: skipped
        }
    }

    result.noise_sigma = options.noise_sigma > 0.0
                             ? options.noise_sigma
                             : (subject_tokens.empty()
                                    ? 0.0
                                    : calibrate_noise(weights, subject_tokens, options.noise_multiplier));

    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!toks[i].ok) continue;
        TraceTarget target;
        target.token_ids = toks[i].ids;
        target.subject_span = toks[i].subject;
        target.traced_token = toks[i].traced;
        target.n_noise_runs = options.n_noise_runs;
        target.noise_sigma = result.noise_sigma;
        // Seeds derive from the row index for reproducibility.
        target.base_seed = util::derive_seed(options.base_seed, i);

        try {
            const TotalEffect te = total_effect(weights, target);
            result.te_norm_by_row[i] = te.te_norm;
            const TeFlag flag{i, te.p_clean, te.p_noised, te.te, te.te_norm};
            switch (classify_te(te.te, te.te_norm)) {
                case TeVerdict::negative: result.negative.push_back(flag); break;
                case TeVerdict::low: result.low.push_back(flag); break;
                case TeVerdict::unflagged: break;
            }
        } catch (const std::domain_error&) {
            result.zero_p_clean.push_back(i);
        }
    }
    return result;
}

TeVerdict classify_te(double te, double te_norm) {
    if (te < 0.0) return TeVerdict::negative;
    if (te_norm < kLowTeThreshold) return TeVerdict::low;
    return TeVerdict::unflagged;
}

bool contains_negation(const std::string& prompt) {
    const std::string lower = util::to_lower(prompt);
    std::size_t pos = 0;
    while ((pos = lower.find("not", pos)) != std::string::npos) {
        const bool left_ok =
            pos == 0 || !std::isalnum(static_cast<unsigned char>(lower[pos - 1]));
        const std::size_t end = pos + 3;
        const bool right_ok =
            end >= lower.size() || !std::isalnum(static_cast<unsigned char>(lower[end]));
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

std::vector<std::size_t> detect_negation(const std::vector<ScenarioSample>& rows) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (contains_negation(rows[i].prompt)) out.push_back(i);
    }
    return out;
}

namespace {

std::vector<double> midrank(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        // Tied block [i, j]: all get the average 1-based rank.
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) {
        throw std::invalid_argument("spearman: length mismatch");
    }
    if (xs.size() < 2) {
        throw std::invalid_argument("spearman: need at least 2 pairs");
    }
    const std::vector<double> rx = midrank(xs);
    const std::vector<double> ry = midrank(ys);
    const double n = static_cast<double>(xs.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mean_x += rx[i];
        mean_y += ry[i];
    }
    mean_x /= n;
    mean_y /= n;
    double cov = 0.0, var_x = 0.0, var_y = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = rx[i] - mean_x;
        const double dy = ry[i] - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if (var_x == 0.0 || var_y == 0.0) return std::nullopt;  // constant input
    return cov / std::sqrt(var_x * var_y);
}

std::map<std::string, int> popularity_histogram(const std::vector<ScenarioSample>& rows,
                                                int* no_record) {
    std::map<std::string, int> buckets = {{"(0,100]", 0},
                                          {"(100,1000]", 0},
                                          {"(1000,10000]", 0},
                                          {"(10000,inf)", 0}};
    int missing = 0;
    for (const ScenarioSample& row : rows) {
        if (!row.popularity || *row.popularity <= 0) {
            ++missing;
            continue;
        }
        const long long v = *row.popularity;
        if (v <= 100) {
            ++buckets["(0,100]"];
        } else if (v <= 1000) {
            ++buckets["(100,1000]"];
        } else if (v <= 10000) {
            ++buckets["(1000,10000]"];
        } else {
            ++buckets["(10000,inf)"];
        }
    }
    if (no_record) *no_record = missing;
    return buckets;
}

std::vector<ScenarioSample> import_external_json(const std::string& content) {
    const json parsed = json::parse(content);
    if (!parsed.is_array()) {
        throw std::runtime_error("external dataset: expected a JSON array of rows");
    }
    std::vector<ScenarioSample> out;
    for (const json& row : parsed) {
        ScenarioSample s;
        s.scenario = Scenario::exact_fact;  // nominal; audits ignore the label
        s.subject = row.at("subject").get<std::string>();
        std::string prompt = row.at("prompt").get<std::string>();
        const std::size_t slot = prompt.find("{}");
        if (slot != std::string::npos) {
            prompt.replace(slot, 2, s.subject);
        }
        s.prompt = prompt;
        const std::size_t at = prompt.find(s.subject);
        if (at != std::string::npos) {
            s.subject_char_span = CharSpan{at, at + s.subject.size()};
        }
        if (row.contains("attribute")) {
            s.gold = row.at("attribute").get<std::string>();
        } else if (row.contains("gold")) {
            s.gold = row.at("gold").get<std::string>();
        }
        s.prediction = row.contains("prediction") ? row.at("prediction").get<std::string>()
                                                  : s.gold.value_or("");
        if (row.contains("relation_id")) {
            if (const auto rel = relation_from_name(row.at("relation_id").get<std::string>())) {
                s.relation = *rel;
            }
        }
        if (row.contains("popularity") && !row.at("popularity").is_null()) {
            s.popularity = row.at("popularity").get<long long>();
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_audit_csv_extracts(const AuditReport& report, const std::vector<ScenarioSample>& rows,
                              const std::filesystem::path& dir) {
    auto flag_csv = [&](const std::vector<TeFlag>& flags) {
        std::string out = "row,prompt,prediction,p_clean,p_noised,te,te_norm\n";
        for (const TeFlag& f : flags) {
            const ScenarioSample& r = rows.at(f.row);
            out += util::csv_row({std::to_string(f.row), r.prompt, r.prediction,
                                  util::format_double(f.p_clean), util::format_double(f.p_noised),
                                  util::format_double(f.te), util::format_double(f.te_norm)});
        }
        return out;
    };
    util::atomic_write_file(dir / "negative_te.csv", flag_csv(report.negative_te_samples));
    util::atomic_write_file(dir / "low_te.csv", flag_csv(report.low_te_samples));

    std::string negation = "row,prompt\n";
    for (const std::size_t i : report.negation_samples) {
        negation += util::csv_row({std::to_string(i), rows.at(i).prompt});
    }
    util::atomic_write_file(dir / "negation.csv", negation);
}

std::string AuditReport::to_json() const {
    json j;
    j["bias_counts"] = bias_counts;
    j["bias_skipped_rows"] = bias_skipped_rows;
    j["popularity_histogram"] = popularity_histogram;
    j["no_popularity_rows"] = no_popularity_rows;

    auto flags_to_json = [](const std::vector<TeFlag>& flags) {
        json arr = json::array();
        for (const TeFlag& f : flags) {
            arr.push_back(json{{"row", f.row},
                               {"p_clean", f.p_clean},
                               {"p_noised", f.p_noised},
                               {"te", f.te},
                               {"te_norm", f.te_norm}});
        }
        return arr;
    };
    j["negative_te_samples"] = flags_to_json(negative_te_samples);
    j["low_te_samples"] = flags_to_json(low_te_samples);
    j["zero_p_clean_samples"] = zero_p_clean_samples;
    j["negation_samples"] = negation_samples;
    j["spearman_te_bias"] = spearman_te_bias ? json(*spearman_te_bias) : json(nullptr);
    return j.dump(2);
}

}  // namespace ct
