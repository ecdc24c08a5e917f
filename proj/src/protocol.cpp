#include "imagery/protocol.hpp"

#include <algorithm>
#include <cctype>
#include "json.hpp"

#include "imagery/error.hpp"

namespace imagery {

using ordered_json = nlohmann::ordered_json;

const char* to_string(ObjectLabel label) noexcept {
    switch (label) {
        case ObjectLabel::original: return "original";
        case ObjectLabel::A: return "A";
        case ObjectLabel::B: return "B";
        case ObjectLabel::C: return "C";
    }
    return "?";
}

std::optional<ObjectLabel> label_from_string(std::string_view s) {
    std::string t;
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) t += c;
    if (t == "A" || t == "a") return ObjectLabel::A;
    if (t == "B" || t == "b") return ObjectLabel::B;
    if (t == "C" || t == "c") return ObjectLabel::C;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    if (t == "original") return ObjectLabel::original;
    return std::nullopt;
}

const char* to_string(Conclusion c) noexcept {
    switch (c) {
        case Conclusion::unknown: return "unknown";
        case Conclusion::probably_not_the_answer: return "probably_not_the_answer";
        case Conclusion::probably_the_odd_one: return "probably_the_odd_one";
    }
    return "?";
}

namespace {

std::optional<Conclusion> conclusion_from_string(std::string_view s) {
    for (Conclusion c : {Conclusion::unknown, Conclusion::probably_not_the_answer, Conclusion::probably_the_odd_one})
        if (s == to_string(c)) return c;
    return std::nullopt;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    return out;
}

// Returns the text of the first ```json fence, if any.
std::optional<std::string_view> fenced_json(std::string_view raw) {
    const std::string low = lower(raw);
    std::size_t pos = 0;
    while ((pos = low.find("```json", pos)) != std::string::npos) {
        const std::size_t body = pos + 7;
        const std::size_t end = low.find("```", body);
        if (end == std::string::npos) return raw.substr(body);
        return raw.substr(body, end - body);
    }
    return std::nullopt;
}

// First balanced {...} outside of string literals.
std::optional<std::string_view> balanced_object(std::string_view raw) {
    for (std::size_t start = raw.find('{'); start != std::string_view::npos; start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false, escaped = false;
        for (std::size_t i = start; i < raw.size(); ++i) {
            const char c = raw[i];
            if (in_string) {
                if (escaped)
                    escaped = false;
                else if (c == '\\')
                    escaped = true;
                else if (c == '"')
                    in_string = false;
                continue;
            }
            if (c == '"')
                in_string = true;
            else if (c == '{')
                ++depth;
            else if (c == '}' && --depth == 0)
                return raw.substr(start, i - start + 1);
        }
    }
    return std::nullopt;
}

ordered_json extract_json(std::string_view raw) {
    if (const auto fenced = fenced_json(raw)) {
        try {
            return ordered_json::parse(fenced->begin(), fenced->end());
        } catch (const nlohmann::json::parse_error& e) {
            // A fence with junk inside may still wrap a usable object.
            if (const auto obj = balanced_object(*fenced)) {
                try {
                    return ordered_json::parse(obj->begin(), obj->end());
                } catch (const nlohmann::json::parse_error&) {
                }
            }
            throw SchemaError({std::string("invalid JSON in fenced block: ") + e.what()});
        }
    }
    if (const auto obj = balanced_object(raw)) {
        try {
            return ordered_json::parse(obj->begin(), obj->end());
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError({std::string("invalid JSON: ") + e.what()});
        }
    }
    throw NoJsonError();
}

}  // namespace

TurnOutput parse_turn_output(std::string_view raw, CommandPolicy policy) {
    const ordered_json doc = extract_json(raw);
    if (!doc.is_object()) throw SchemaError({"payload is not a JSON object"});

    std::vector<std::string> problems;
    TurnOutput out;

    const auto memory = doc.find("memory");
    if (memory == doc.end() || !memory->is_object()) {
        problems.emplace_back("memory: missing or not an object");
    } else {
        const auto rationale = memory->find("rationale");
        if (rationale == memory->end() || !rationale->is_string())
            problems.emplace_back("memory.rationale: missing or not a string");
        else
            out.memory.rationale = rationale->get<std::string>();

        const auto pc = memory->find("partial_conclusion");
        if (pc == memory->end() || !pc->is_object()) {
            problems.emplace_back("memory.partial_conclusion: missing or not an object");
        } else {
            for (ObjectLabel l : kOptionLabels) {
                const auto v = pc->find(to_string(l));
                if (v == pc->end()) {
                    problems.push_back(std::string("memory.partial_conclusion.") + to_string(l) + ": missing");
                    continue;
                }
                const auto c = v->is_string() ? conclusion_from_string(v->get<std::string>()) : std::nullopt;
                if (!c)
                    problems.push_back(std::string("memory.partial_conclusion.") + to_string(l) +
                                       ": must be unknown, probably_not_the_answer or probably_the_odd_one");
                else
                    out.memory.partial_conclusion[option_index(l)] = *c;
            }
            for (const auto& [key, value] : pc->items())
                if (key != "A" && key != "B" && key != "C")
                    problems.push_back("memory.partial_conclusion." + key + ": unexpected option");
        }
    }

    const auto iteration = doc.find("iteration_number");
    if (iteration == doc.end() || !iteration->is_number_integer() || iteration->get<long long>() < 1 ||
        iteration->get<long long>() > 1'000'000)
        problems.emplace_back("iteration_number: missing or not a positive integer");
    else
        out.iteration_number = iteration->get<int>();

    const auto answer = doc.find("final_answer");
    if (answer != doc.end() && !answer->is_null()) {
        const auto label = answer->is_string() ? label_from_string(answer->get<std::string>()) : std::nullopt;
        if (!label || *label == ObjectLabel::original)
            problems.emplace_back("final_answer: must be null, \"A\", \"B\" or \"C\"");
        else
            out.final_answer = label;
    }

    const auto commands = doc.find("commands");
    if (commands == doc.end() || !commands->is_array()) {
        problems.emplace_back("commands: missing or not an array");
    } else {
        std::size_t index = 0;
        for (const auto& entry : *commands) {
            const std::string where = "commands[" + std::to_string(index) + "]";
            const auto target = entry.is_object() ? entry.find("target") : entry.end();
            const auto seq = entry.is_object() ? entry.find("rotation_sequence") : entry.end();
            if (!entry.is_object() || target == entry.end() || !target->is_string() || seq == entry.end() ||
                !seq->is_string()) {
                problems.push_back(where + ": needs string fields target and rotation_sequence");
                ++index;
                continue;
            }
            const std::string target_text = target->get<std::string>();
            const std::string seq_text = seq->get<std::string>();
            const auto label = label_from_string(target_text);
            if (!label) {
                if (policy == CommandPolicy::strict) problems.push_back(where + ".target: unknown target " + target_text);
                out.rejected.push_back({index, target_text, seq_text, "unknown target '" + target_text + "'"});
                ++index;
                continue;
            }
            try {
                out.commands.push_back({*label, parse_sequence(seq_text)});
            } catch (const ParseError& e) {
                if (policy == CommandPolicy::strict && problems.empty()) throw;
                out.rejected.push_back({index, target_text, seq_text, e.what()});
            }
            ++index;
        }
        if (commands->empty() && !out.final_answer)
            problems.emplace_back("commands: may be empty only when final_answer is given");
    }

    if (!problems.empty()) throw SchemaError(std::move(problems));
    return out;
}

std::string serialize_turn_output(const TurnOutput& turn) {
    ordered_json doc;
    doc["memory"]["rationale"] = turn.memory.rationale;
    for (ObjectLabel l : kOptionLabels)
        doc["memory"]["partial_conclusion"][to_string(l)] = to_string(turn.memory.partial_conclusion[option_index(l)]);
    doc["iteration_number"] = turn.iteration_number;
    doc["commands"] = ordered_json::array();
    for (const auto& seq : turn.commands)
        doc["commands"].push_back({{"target", to_string(seq.target)}, {"rotation_sequence", format_sequence(seq.steps)}});
    for (const auto& rej : turn.rejected)
        doc["commands"].push_back({{"target", rej.target}, {"rotation_sequence", rej.rotation_sequence}});
    doc["final_answer"] = turn.final_answer ? ordered_json(to_string(*turn.final_answer)) : ordered_json(nullptr);
    return "```json\n" + doc.dump(2) + "\n```";
}

const char* to_string(PromptVariant v) noexcept {
    switch (v) {
        case PromptVariant::incremental: return "incremental";
        case PromptVariant::reset: return "reset";
        case PromptVariant::sweep360: return "sweep360";
    }
    return "?";
}

std::optional<PromptVariant> prompt_variant_from_string(std::string_view s) {
    for (PromptVariant v : {PromptVariant::incremental, PromptVariant::reset, PromptVariant::sweep360})
        if (s == to_string(v)) return v;
    return std::nullopt;
}

std::string serialize_problem_statement(std::string_view statement) {
    return "# PROBLEM\n" + std::string(statement);
}

std::string build_instructions(PromptVariant variant, const PromptOptions& options, int min_iterations,
                               bool reset_enabled, bool allow_original_target) {
    std::string s;
    s += "# TASK\n"
         "You are solving a 3D mental-rotation problem. One original cube stack and three options (A, B, C) are "
         "shown. Exactly one option cannot be produced from the original by rotation alone; find it.\n\n";
    s += "# IMAGERY MODULE\n"
         "A separate imagery module keeps a 3D model of every object and renders it on request. Each object keeps "
         "its orientation between turns, and each starts in the orientation shown in the problem image. "
         "Instead of imagining a rotation, ask the module to perform it and look at the snapshot it returns.\n"
         "The exchange runs in turns: you send rotation commands, the module applies them and returns snapshots, "
         "then you decide what to do next.\n";
    s += allow_original_target ? "You may rotate the original as well as the options.\n"
                               : "Only the options (A, B, C) can be rotated; the original stays fixed.\n";
    s += "\n# COMMANDS\n"
         "Commands are relative to the current view: the object turns about its own center in front of a fixed "
         "camera, as if held in your hands.\n"
         "- left:V      turn the object to the left\n"
         "- right:V     turn the object to the right\n"
         "- up:V        tip the object upward\n"
         "- down:V      tip the object downward\n"
         "- rotate:cw:V   spin clockwise in the image plane\n"
         "- rotate:ccw:V  spin counterclockwise in the image plane\n";
    if (reset_enabled) s += "- reset        return the object to its canonical build orientation\n";
    s += "V is an angle in degrees. V = 0 simply takes a snapshot of the current state.\n"
         "Several commands for one target are separated by commas; every command yields one snapshot and the "
         "snapshots of a target are joined left to right into one grid image.\n\n";

    switch (variant) {
        case PromptVariant::incremental:
            s += "# APPROACH\nRotating with the module can bring an option to exactly the original's view. "
                 "Rotate, check, and repeat.\n\n";
            break;
        case PromptVariant::reset:
            s += "# APPROACH\nAll objects were built in the same coordinate frame, so after `reset` two matching "
                 "objects look identical. Reset the options, then compare a top view (down:90) and a "
                 "horizontal view (left:0).\n\n";
            break;
        case PromptVariant::sweep360:
            s += "# APPROACH\nRequest a full 360-degree trajectory for an option and look for a frame that matches "
                 "the original. Short example (6 steps): right:60,right:60,right:60,right:60,right:60,right:60. "
                 "Long example (20 steps): twenty repetitions of right:18.\n\n";
            break;
    }

    s += "# OUTPUT\n"
         "Reply with exactly one JSON object enclosed in ```json and ``` using these keys:\n"
         "```json\n"
         "{\n"
         "  \"memory\": {\n"
         "    \"rationale\": \"reasoning so far\",\n"
         "    \"partial_conclusion\": {\"A\": \"unknown\", \"B\": \"unknown\", \"C\": \"unknown\"}\n"
         "  },\n"
         "  \"iteration_number\": 1,\n"
         "  \"commands\": [{\"target\": \"A\", \"rotation_sequence\": \"right:15,right:15,up:10\"}],\n"
         "  \"final_answer\": null\n"
         "}\n"
         "```\n"
         "partial_conclusion values are unknown, probably_not_the_answer or probably_the_odd_one. "
         "`memory` is returned to you on every later turn. iteration_number starts at 1 and increases by one "
         "per turn. Set final_answer to \"A\", \"B\" or \"C\" once you are sure, otherwise null.\n"
         "Produce one JSON reply per turn and stop; the module's turn is handled outside of you.\n\n";

    s += "# CONTEXT YOU RECEIVE\n"
         "- the problem statement and image\n"
         "- all of your previous replies\n"
         "- the snapshots from the last iteration only\n"
         "- a current snapshot of the original\n";

    std::string strategy;
    if (options.require_min_iterations && min_iterations > 1)
        strategy += "- Work through at least " + std::to_string(min_iterations) + " iterations before answering.\n";
    if (options.prefer_geometric_match)
        strategy += "- Prefer rotating until an option visibly coincides with the original over reasoning about "
                    "its structure.\n";
    if (options.step_by_step)
        strategy += "- First understand the overall structure, then examine one option at a time.\n";
    if (options.track_candidates)
        strategy += "- Keep partial_conclusion current for every option.\n";
    if (options.estimate_distance)
        strategy += "- Before each rotation, estimate how far the option is from the original's view.\n";
    if (!strategy.empty()) s += "\n# STRATEGY\n" + strategy;
    return s;
}

namespace {

ContentPart text_part(std::string text) { return {ContentPart::Kind::text, std::move(text), {}}; }

ContentPart image_part(std::string caption, const RasterImage& img) {
    return {ContentPart::Kind::image, std::move(caption), encode_png(img)};
}

}  // namespace

std::vector<ChatMessage> serialize_turn_context(const TurnContext& ctx) {
    std::vector<ChatMessage> msgs;
    msgs.push_back({"system", {text_part(ctx.instructions)}});
    msgs.push_back({"user", {text_part(serialize_problem_statement(ctx.statement)), image_part("problem", ctx.problem_image)}});
    for (const auto& prev : ctx.previous_outputs) msgs.push_back({"assistant", {text_part(prev)}});

    ChatMessage now{"user", {}};
    if (!ctx.last_grids.empty() || !ctx.feedback.empty()) {
        std::string header = "# IMAGERY MODULE OUTPUT (iteration " + std::to_string(ctx.iteration_number - 1) + ")";
        if (!ctx.feedback.empty()) header += "\n" + ctx.feedback;
        now.parts.push_back(text_part(std::move(header)));
        for (const auto& g : ctx.last_grids) {
            now.parts.push_back(text_part("Target " + g.caption));
            now.parts.push_back(image_part(g.caption, g.image));
        }
    }
    now.parts.push_back(text_part("Current snapshot of the original:"));
    now.parts.push_back(image_part("original", ctx.original_snapshot));
    now.parts.push_back(text_part("Your turn: produce iteration " + std::to_string(ctx.iteration_number) + "."));
    msgs.push_back(std::move(now));
    return msgs;
}

}  // namespace imagery
