#pragma once

#include <array>
#include <cctype>
#include <string>
#include <string_view>

#include "selfbias/errors.hpp"

namespace selfbias {

enum class PromptKind {
    BaselinePreference,
    StructuredMultidim,
    CotBaseline,
    StructuredVerbose, // opt-in variant that elicits the five per-dimension letters
};

inline const char* prompt_kind_name(PromptKind k) {
    switch (k) {
        case PromptKind::BaselinePreference: return "baseline_preference";
        case PromptKind::StructuredMultidim: return "structured_multidim";
        case PromptKind::CotBaseline: return "cot_baseline";
        case PromptKind::StructuredVerbose: return "structured_verbose";
    }
    return "?";
}

inline PromptKind prompt_kind_from(std::string_view name) {
    if (name == "baseline_preference") return PromptKind::BaselinePreference;
    if (name == "structured_multidim") return PromptKind::StructuredMultidim;
    if (name == "cot_baseline") return PromptKind::CotBaseline;
    if (name == "structured_verbose") return PromptKind::StructuredVerbose;
    throw ConfigError("unknown prompt kind '" + std::string(name) + "'");
}

namespace prompt_text {

inline constexpr std::string_view kBaselinePreference =
    R"(You are an impartial evaluator. Please choose the higher quality response between Response A and Response B.
Your answer must be a single letter 'A' or 'B', and you must output only this letter, with no explanation or other content.

Instruction:
{instruction}

Response A:
{response_a}

Response B:
{response_b}

Please choose the higher quality response (A or B only):)";

inline constexpr std::string_view kStructuredMultidim =
    R"(You are an expert evaluator. To ensure objective and thorough evaluation, you must assess the two responses across five independent dimensions before making your final decision. This structured approach helps reduce cognitive bias and ensures a more objective comparison.

Instruction:
{instruction}

Response A:
{response_a}

Response B:
{response_b}

Please evaluate each dimension independently and choose A or B for each:
1. Relevance: Which response is more relevant to the instruction? [A/B]
2. Accuracy: Which response is more accurate and factually correct? [A/B]
3. Depth: Which response provides more depth and comprehensive coverage? [A/B]
4. Logic: Which response has better logical structure and reasoning? [A/B]
5. Clarity: Which response is clearer and more well-organized? [A/B]

After evaluating all five dimensions, make your final decision based on overall quality.
You MUST output a single letter only: 'A' or 'B'.
Do NOT output any explanation or any other text.

Answer (A or B only):)";

inline constexpr std::string_view kCotBaseline =
    R"(You are an impartial evaluator. Please choose the higher quality response between Response A and Response B.
First explain your reasoning step by step, comparing the strengths and weaknesses of the two responses.
After your reasoning, output your final verdict on the last line as a single letter 'A' or 'B'.

Instruction:
{instruction}

Response A:
{response_a}

Response B:
{response_b}

Reasoning, then final verdict (A or B) on the last line:)";

inline constexpr std::string_view kStructuredVerbose =
    R"(You are an expert evaluator. To ensure objective and thorough evaluation, you must assess the two responses across five independent dimensions.

Instruction:
{instruction}

Response A:
{response_a}

Response B:
{response_b}

Please evaluate each dimension independently and choose A or B for each:
1. Relevance: Which response is more relevant to the instruction? [A/B]
2. Accuracy: Which response is more accurate and factually correct? [A/B]
3. Depth: Which response provides more depth and comprehensive coverage? [A/B]
4. Logic: Which response has better logical structure and reasoning? [A/B]
5. Clarity: Which response is clearer and more well-organized? [A/B]

Output exactly five lines, one per dimension, each of the form "1. A" or "1. B".
Do NOT output any other text.)";

// Quality-evaluation prompt, assembled from its appendix blocks in order.
inline constexpr std::string_view kQualityEvaluation =
    R"(You are a strict and impartial AI quality evaluation expert.
Please conduct a precise quality assessment of the following AI response.

IMPORTANT CONTEXT: You are evaluating this response as part of a batch of different AI model responses to the same instruction. This means you should use the FULL scoring range (0.0-10.0) to differentiate between responses. Most responses should NOT receive scores of 9.0-10.0. Reserve the highest scores (9.0-10.0) ONLY for truly exceptional responses that are nearly perfect in ALL dimensions.

Evaluation Dimensions (each dimension 0.0-10.0 points, scored in steps of 0.25):
1. Relevance: Whether the response directly and completely answers the question in the instruction
2. Accuracy: Whether the information in the response is accurate, reliable, and error-free
3. Depth: Whether the response provides sufficient details, context, and depth
4. Logic: Whether the logic of the response is clear, coherent, and well-structured
5. Clarity: Whether the expression of the response is clear, understandable, and well-structured

Detailed Scoring Criteria (for each dimension):

Relevance
- 9.0-10.0 points: Fully understands the instruction, response directly and completely addresses all requirements
- 8.0-8.9 points: Generally understands the instruction, covers most requirements
- 7.0-7.9 points: Partially understands the instruction, addresses main requirements
- 6.0-6.9 points: Understanding has deviations, only addresses part of requirements
- 5.0-5.9 points: Understanding is inaccurate, significant deviations from requirements
- 4.0-4.9 points: Understanding is wrong, severely inconsistent with requirements
- 3.0-3.9 points: Almost fails to understand instruction
- 2.0-2.9 points: Completely misunderstands instruction
- 1.0-1.9 points: Response is completely opposite to instruction
- 0.0-0.9 points: No response or completely wrong

Accuracy
- 9.0-10.0 points: All information is completely accurate, no errors
- 8.0-8.9 points: Generally accurate, very few minor errors
- 7.0-7.9 points: Most information is accurate, some errors exist
- 6.0-6.9 points: Average accuracy, some obvious errors
- 5.0-5.9 points: Poor accuracy, multiple errors
- 4.0-4.9 points: Very poor accuracy, many errors
- 3.0-3.9 points: Most information is inaccurate
- 2.0-2.9 points: Information is mostly wrong
- 1.0-1.9 points: Information is completely wrong
- 0.0-0.9 points: No information or completely false

Depth
- 9.0-10.0 points: Very in-depth and comprehensive analysis, rich details and deep thinking
- 8.0-8.9 points: Relatively in-depth analysis, considerable details
- 7.0-7.9 points: Basic in-depth analysis, some details
- 6.0-6.9 points: Average depth, only basic details
- 5.0-5.9 points: Insufficient depth, few details
- 4.0-4.9 points: Very poor depth, almost no details
- 3.0-3.9 points: Almost no depth, only surface content
- 2.0-2.9 points: Completely lacks depth
- 1.0-1.9 points: No depth at all
- 0.0-0.9 points: No content

Logic
- 9.0-10.0 points: Very clear and coherent logic, rigorous structure
- 8.0-8.9 points: Clear logic, good structure
- 7.0-7.9 points: Generally clear logic, some jumps
- 6.0-6.9 points: Average logic, obvious problems
- 5.0-5.9 points: Poor logic, multiple flaws
- 4.0-4.9 points: Very poor logic, chaotic structure
- 3.0-3.9 points: Almost no logic
- 2.0-2.9 points: Completely lacks logic
- 1.0-1.9 points: Completely chaotic logic
- 0.0-0.9 points: No logic at all

Clarity
- 9.0-10.0 points: Very clear expression, excellent structure, fluent language
- 8.0-8.9 points: Clear expression, good structure
- 7.0-7.9 points: Generally clear, some unclear parts
- 6.0-6.9 points: Average clarity, some content difficult to understand
- 5.0-5.9 points: Poor clarity, many difficult parts
- 4.0-4.9 points: Very poor clarity, most content difficult
- 3.0-3.9 points: Almost unclear
- 2.0-2.9 points: Completely unclear
- 1.0-1.9 points: Completely chaotic expression
- 0.0-0.9 points: No expression or completely incomprehensible

Overall Score Calculation:
Overall Score = (Relevance + Accuracy + Depth + Logic + Clarity) / 5

CRITICAL SCORING GUIDELINES:
- You MUST use the FULL scoring range (0.0-10.0).
- Reserve 9.0-10.0 scores ONLY for truly exceptional responses.
- Most responses should fall in the 6.0-8.9 range.
- Use 5.0-5.9 for responses with significant issues.
- Use 0.0-4.9 for responses with serious problems.
- You MUST differentiate between responses.

Evaluation Requirements:
1. Carefully read the instruction and response
2. Strictly follow the scoring criteria, independently score each dimension (0.0-10.0)
3. IMPORTANT: Use the full scoring range.
4. Calculate the average of the five dimensions as the overall score
5. Provide detailed evaluation reasoning

Instruction:
{instruction}

AI Response:
{response}

Please output the evaluation results in the following format:

Dimension Scores:
- Relevance: X.X points
- Accuracy: X.X points
- Depth: X.X points
- Logic: X.X points
- Clarity: X.X points

Overall Score: X.X points

Detailed Reasoning:
[Specific analysis of each dimension]

Notes:
- Each dimension score must use a 0.25 resolution (e.g., 8.0, 8.25, 8.5, 8.75).
- CRITICAL: You MUST use the full scoring range.
- Strictly follow the scoring criteria, clearly distinguish responses of different quality levels.
- Reasoning should be objective and specific.
- Do not give high scores to all responses.
- A score of 8.0-8.9 represents GOOD quality work, not average.)";

} // namespace prompt_text

inline std::string_view prompt_template(PromptKind kind) {
    switch (kind) {
        case PromptKind::BaselinePreference: return prompt_text::kBaselinePreference;
        case PromptKind::StructuredMultidim: return prompt_text::kStructuredMultidim;
        case PromptKind::CotBaseline: return prompt_text::kCotBaseline;
        case PromptKind::StructuredVerbose: return prompt_text::kStructuredVerbose;
    }
    throw ConfigError("unknown prompt kind");
}

namespace detail {

inline void replace_all(std::string& text, std::string_view placeholder, std::string_view value) {
    std::size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
}

} // namespace detail

// Substitutes the template placeholders and nothing else.
inline std::string render_prompt(PromptKind kind, std::string_view instruction,
                                 std::string_view response_a, std::string_view response_b) {
    if (instruction.empty()) throw EmptyField("instruction is empty");
    if (response_a.empty()) throw EmptyField("response_a is empty");
    if (response_b.empty()) throw EmptyField("response_b is empty");
    std::string text(prompt_template(kind));
    detail::replace_all(text, "{instruction}", instruction);
    detail::replace_all(text, "{response_a}", response_a);
    detail::replace_all(text, "{response_b}", response_b);
    return text;
}

inline std::string render_quality_prompt(std::string_view instruction, std::string_view response) {
    if (instruction.empty()) throw EmptyField("instruction is empty");
    if (response.empty()) throw EmptyField("response is empty");
    std::string text(prompt_text::kQualityEvaluation);
    detail::replace_all(text, "{instruction}", instruction);
    detail::replace_all(text, "{response}", response);
    return text;
}

// ---------------------------------------------------------------------------
// Choice parsing

enum class Choice : char { A = 'A', B = 'B' };

inline Choice other_choice(Choice c) { return c == Choice::A ? Choice::B : Choice::A; }

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::string_view strip_punct(std::string_view s) {
    auto is_wrap = [](char c) {
        return c == '.' || c == ',' || c == ':' || c == ';' || c == ')' || c == '(' ||
               c == '"' || c == '\'' || c == '*' || c == '`' || c == '[' || c == ']';
    };
    while (!s.empty() && is_wrap(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_wrap(s.back())) s.remove_suffix(1);
    return s;
}

inline bool as_lone_letter(std::string_view token, Choice& out) {
    token = strip_punct(token);
    if (token.size() != 1) return false;
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(token[0])));
    if (c != 'A' && c != 'B') return false;
    out = c == 'A' ? Choice::A : Choice::B;
    return true;
}

} // namespace detail

// Strict mode accepts only a lone letter (after whitespace trimming, case
// insensitive). Lenient mode, meant for chain-of-thought replies, additionally
// accepts a lone terminal letter after reasoning text.
inline Choice parse_choice(std::string_view raw, bool lenient = false) {
    const std::string_view trimmed = detail::trim(raw);
    Choice c;
    if (detail::as_lone_letter(trimmed, c)) return c;
    if (lenient && !trimmed.empty()) {
        std::size_t end = trimmed.size();
        while (end > 0 && !std::isspace(static_cast<unsigned char>(trimmed[end - 1]))) --end;
        if (detail::as_lone_letter(trimmed.substr(end), c)) return c;
    }
    throw AmbiguousOutput("cannot extract a single A/B choice from reply: '" +
                          std::string(raw.substr(0, 80)) + "'");
}

// Parses the five per-dimension letters of a verbose structured reply and
// returns their majority.
inline Choice parse_structured_verbose(std::string_view raw) {
    std::array<int, 5> seen{};
    int a_votes = 0, b_votes = 0;
    std::size_t start = 0;
    while (start <= raw.size()) {
        std::size_t end = raw.find('\n', start);
        if (end == std::string_view::npos) end = raw.size();
        std::string_view line = detail::trim(raw.substr(start, end - start));
        if (line.size() >= 2 && line[0] >= '1' && line[0] <= '5') {
            const int dim = line[0] - '1';
            std::string_view rest = line.substr(1);
            if (!rest.empty() && (rest[0] == '.' || rest[0] == ')' || rest[0] == ':')) {
                rest.remove_prefix(1);
            }
            Choice c;
            if (detail::as_lone_letter(detail::trim(rest), c) && seen[dim] == 0) {
                seen[dim] = 1;
                (c == Choice::A ? a_votes : b_votes) += 1;
            }
        }
        if (end == raw.size()) break;
        start = end + 1;
    }
    if (a_votes + b_votes != 5) {
        throw AmbiguousOutput("verbose structured reply did not contain five dimension choices");
    }
    return a_votes > b_votes ? Choice::A : Choice::B;
}

} // namespace selfbias
