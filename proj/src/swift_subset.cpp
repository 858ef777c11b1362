#include "assist/swift_subset.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <optional>

namespace assist {

namespace {

enum class Tok { Ident, Number, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    int line = 1;
};

std::vector<Token> tokenize(std::string_view src)
{
    static const std::vector<std::string> puncts{"->", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=",
                                                 "(",  ")",  "{",  "}",  ",",  ":",  "=",  "<",  ">",  "+",
                                                 "-",  "*",  "/",  "%",  "!",  ".",  "@",  "\\", "[",  "]",
                                                 "?",  ";"};
    std::vector<Token> out;
    int line = 1;
    std::size_t i = 0;
    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            ++line;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (src.substr(i).starts_with("//")) {
            while (i < src.size() && src[i] != '\n') ++i;
            continue;
        }
        if (src.substr(i).starts_with("/*")) {
            auto end = src.find("*/", i + 2);
            for (std::size_t k = i; k < std::min(end, src.size()); ++k) {
                if (src[k] == '\n') ++line;
            }
            i = end == std::string_view::npos ? src.size() : end + 2;
            continue;
        }
        if (c == '"') {
            // String literals only appear outside funcs; keep them opaque.
            std::size_t j = i + 1;
            while (j < src.size() && src[j] != '"' && src[j] != '\n') {
                j += src[j] == '\\' ? 2 : 1;
            }
            out.push_back({Tok::Punct, "\"", line});
            i = std::min(j + 1, src.size());
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            out.push_back({Tok::Ident, std::string(src.substr(i, j - i)), line});
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            std::string digits;
            for (char d : src.substr(i, j - i)) {
                if (d != '_') digits += d;
            }
            out.push_back({Tok::Number, digits, line});
            i = j;
            continue;
        }
        bool matched = false;
        for (const auto& p : puncts) {
            if (src.substr(i).starts_with(p)) {
                out.push_back({Tok::Punct, p, line});
                i += p.size();
                matched = true;
                break;
            }
        }
        if (!matched) {
            out.push_back({Tok::Punct, std::string(1, c), line});
            ++i;
        }
    }
    out.push_back({Tok::End, "", line});
    return out;
}

struct Expr {
    enum class Kind { Number, Name, Unary, Binary, Call } kind;
    std::int64_t value = 0;
    std::string name;  // identifier, operator or callee
    std::vector<std::unique_ptr<Expr>> args;
    int line = 0;
};

struct Stmt {
    enum class Kind { Declare, Assign, While, If, Return, ExprStmt } kind;
    std::string name;
    std::string op;  // "=", "+=", "-=", "*="
    bool mutableBinding = false;
    std::unique_ptr<Expr> expr;
    std::vector<std::unique_ptr<Stmt>> body;
    std::vector<std::unique_ptr<Stmt>> orElse;
    int line = 0;
};

}  // namespace

struct SwiftSubset::Function {
    std::string name;
    std::vector<std::string> params;
    std::vector<std::unique_ptr<Stmt>> body;
};

namespace {

class Parser {
public:
    explicit Parser(std::vector<Token> toks) : t_(std::move(toks)) {}

    std::map<std::string, std::shared_ptr<SwiftSubset::Function>> parseFile()
    {
        std::map<std::string, std::shared_ptr<SwiftSubset::Function>> out;
        while (peek().kind != Tok::End) {
            if (isIdent("func")) {
                auto f = parseFunc();
                auto name = f->name;
                if (!out.emplace(name, std::move(f)).second) {
                    fail("duplicate function " + name);
                }
                continue;
            }
            // Anything else at top level: skip one token, or a whole braced block.
            if (isPunct("{")) {
                skipBlock();
            } else {
                ++p_;
            }
        }
        return out;
    }

private:
    const Token& peek(std::size_t k = 0) const { return t_[std::min(p_ + k, t_.size() - 1)]; }
    bool isIdent(std::string_view s) const { return peek().kind == Tok::Ident && peek().text == s; }
    bool isPunct(std::string_view s) const { return peek().kind == Tok::Punct && peek().text == s; }

    [[noreturn]] void fail(const std::string& msg) const
    {
        throw SwiftError("line " + std::to_string(peek().line) + ": " + msg);
    }

    void expect(std::string_view punct)
    {
        if (!isPunct(punct)) {
            fail("expected '" + std::string(punct) + "' but found '" + peek().text + "'");
        }
        ++p_;
    }

    std::string ident()
    {
        if (peek().kind != Tok::Ident) {
            fail("expected an identifier but found '" + peek().text + "'");
        }
        return t_[p_++].text;
    }

    void skipBlock()
    {
        int depth = 0;
        do {
            if (peek().kind == Tok::End) fail("unbalanced braces");
            if (isPunct("{")) ++depth;
            if (isPunct("}")) --depth;
            ++p_;
        } while (depth > 0);
    }

    void expectIntType()
    {
        if (ident() != "Int") {
            fail("only Int is supported");
        }
    }

    std::shared_ptr<SwiftSubset::Function> parseFunc()
    {
        ++p_;  // func
        auto f = std::make_shared<SwiftSubset::Function>();
        f->name = ident();
        expect("(");
        while (!isPunct(")")) {
            // `_ a: Int` or `a: Int` or `label a: Int`
            std::string first = ident();
            std::string local = first;
            if (peek().kind == Tok::Ident) {
                local = ident();
            }
            expect(":");
            expectIntType();
            f->params.push_back(local);
            if (isPunct(",")) {
                ++p_;
            } else if (!isPunct(")")) {
                fail("expected ',' or ')' in parameter list");
            }
        }
        expect(")");
        expect("->");
        expectIntType();
        f->body = parseBlock();
        return f;
    }

    std::vector<std::unique_ptr<Stmt>> parseBlock()
    {
        expect("{");
        std::vector<std::unique_ptr<Stmt>> out;
        while (!isPunct("}")) {
            if (peek().kind == Tok::End) fail("unterminated block");
            if (isPunct(";")) {
                ++p_;
                continue;
            }
            out.push_back(parseStmt());
        }
        ++p_;
        return out;
    }

    std::unique_ptr<Stmt> parseStmt()
    {
        auto s = std::make_unique<Stmt>();
        s->line = peek().line;
        if (isIdent("var") || isIdent("let")) {
            s->kind = Stmt::Kind::Declare;
            s->mutableBinding = peek().text == "var";
            ++p_;
            s->name = ident();
            if (isPunct(":")) {
                ++p_;
                expectIntType();
            }
            expect("=");
            s->expr = parseExpr();
            return s;
        }
        if (isIdent("while")) {
            ++p_;
            s->kind = Stmt::Kind::While;
            s->expr = parseExpr();
            s->body = parseBlock();
            return s;
        }
        if (isIdent("if")) {
            ++p_;
            s->kind = Stmt::Kind::If;
            s->expr = parseExpr();
            s->body = parseBlock();
            if (isIdent("else")) {
                ++p_;
                if (isIdent("if")) {
                    s->orElse.push_back(parseStmt());
                } else {
                    s->orElse = parseBlock();
                }
            }
            return s;
        }
        if (isIdent("return")) {
            ++p_;
            s->kind = Stmt::Kind::Return;
            s->expr = parseExpr();
            return s;
        }
        if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct &&
            (peek(1).text == "=" || peek(1).text == "+=" || peek(1).text == "-=" || peek(1).text == "*=")) {
            s->kind = Stmt::Kind::Assign;
            s->name = ident();
            s->op = t_[p_++].text;
            s->expr = parseExpr();
            return s;
        }
        s->kind = Stmt::Kind::ExprStmt;
        s->expr = parseExpr();
        return s;
    }

    static int precedence(const std::string& op)
    {
        if (op == "||") return 1;
        if (op == "&&") return 2;
        if (op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=") return 3;
        if (op == "+" || op == "-") return 4;
        if (op == "*" || op == "/" || op == "%") return 5;
        return 0;
    }

    std::unique_ptr<Expr> parseExpr(int minPrec = 1)
    {
        auto lhs = parseUnary();
        for (;;) {
            if (peek().kind != Tok::Punct) break;
            auto op = peek().text;
            int prec = precedence(op);
            if (prec < minPrec || prec == 0) break;
            int line = peek().line;
            ++p_;
            auto rhs = parseExpr(prec + 1);
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Binary;
            e->name = op;
            e->line = line;
            e->args.push_back(std::move(lhs));
            e->args.push_back(std::move(rhs));
            lhs = std::move(e);
        }
        return lhs;
    }

    std::unique_ptr<Expr> parseUnary()
    {
        if (isPunct("-") || isPunct("!")) {
            auto e = std::make_unique<Expr>();
            e->kind = Expr::Kind::Unary;
            e->name = peek().text;
            e->line = peek().line;
            ++p_;
            e->args.push_back(parseUnary());
            return e;
        }
        return parsePrimary();
    }

    std::unique_ptr<Expr> parsePrimary()
    {
        auto e = std::make_unique<Expr>();
        e->line = peek().line;
        if (peek().kind == Tok::Number) {
            e->kind = Expr::Kind::Number;
            try {
                e->value = std::stoll(t_[p_++].text);
            } catch (const std::exception&) {
                fail("integer literal out of range");
            }
            return e;
        }
        if (isPunct("(")) {
            ++p_;
            auto inner = parseExpr();
            expect(")");
            return inner;
        }
        e->name = ident();
        if (isPunct("(")) {
            ++p_;
            e->kind = Expr::Kind::Call;
            while (!isPunct(")")) {
                // Argument labels (`a: x`) are accepted and ignored.
                if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct && peek(1).text == ":") {
                    p_ += 2;
                }
                e->args.push_back(parseExpr());
                if (isPunct(",")) {
                    ++p_;
                } else if (!isPunct(")")) {
                    fail("expected ',' or ')' in call");
                }
            }
            ++p_;
            return e;
        }
        e->kind = Expr::Kind::Name;
        return e;
    }

    std::vector<Token> t_;
    std::size_t p_ = 0;
};

struct ReturnSignal {
    std::int64_t value;
};

struct Binding {
    std::int64_t value;
    bool mutableBinding;
};

class Interp {
public:
    Interp(const std::map<std::string, std::shared_ptr<SwiftSubset::Function>>& fns, std::uint64_t limit)
        : fns_(fns), limit_(limit)
    {
    }

    std::int64_t call(const std::string& name, const std::vector<std::int64_t>& args, int depth)
    {
        if (depth > 256) {
            throw SwiftError("recursion too deep in " + name);
        }
        if (name == "min" || name == "max" || name == "abs") {
            if (name == "abs") {
                if (args.size() != 1) throw SwiftError("abs takes 1 argument");
                if (args[0] == std::numeric_limits<std::int64_t>::min()) throw SwiftError("overflow in abs");
                return args[0] < 0 ? -args[0] : args[0];
            }
            if (args.size() < 2) throw SwiftError(name + " takes at least 2 arguments");
            return name == "min" ? *std::min_element(args.begin(), args.end())
                                 : *std::max_element(args.begin(), args.end());
        }
        auto it = fns_.find(name);
        if (it == fns_.end()) {
            throw SwiftError("call to undefined function " + name);
        }
        const auto& f = *it->second;
        if (f.params.size() != args.size()) {
            throw SwiftError(name + " expects " + std::to_string(f.params.size()) + " arguments");
        }
        std::vector<std::map<std::string, Binding>> scopes(1);
        for (std::size_t i = 0; i < args.size(); ++i) {
            scopes[0][f.params[i]] = {args[i], false};
        }
        try {
            execBlock(f.body, scopes, depth);
        } catch (const ReturnSignal& r) {
            return r.value;
        }
        throw SwiftError(name + " finished without returning");
    }

private:
    using Scopes = std::vector<std::map<std::string, Binding>>;

    Binding* lookup(Scopes& scopes, const std::string& name)
    {
        for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
            auto found = it->find(name);
            if (found != it->end()) return &found->second;
        }
        return nullptr;
    }

    void tick()
    {
        if (++steps_ > limit_) {
            throw SwiftError("step limit exceeded");
        }
    }

    void execBlock(const std::vector<std::unique_ptr<Stmt>>& body, Scopes& scopes, int depth)
    {
        scopes.emplace_back();
        struct Pop {
            Scopes& s;
            ~Pop() { s.pop_back(); }
        } pop{scopes};
        for (const auto& s : body) {
            exec(*s, scopes, depth);
        }
    }

    void exec(const Stmt& s, Scopes& scopes, int depth)
    {
        tick();
        switch (s.kind) {
        case Stmt::Kind::Declare: {
            auto v = eval(*s.expr, scopes, depth);
            if (scopes.back().contains(s.name)) {
                throw SwiftError("line " + std::to_string(s.line) + ": redeclaration of " + s.name);
            }
            scopes.back()[s.name] = {v, s.mutableBinding};
            return;
        }
        case Stmt::Kind::Assign: {
            auto* b = lookup(scopes, s.name);
            if (!b) throw SwiftError("line " + std::to_string(s.line) + ": undefined name " + s.name);
            if (!b->mutableBinding) {
                throw SwiftError("line " + std::to_string(s.line) + ": cannot assign to constant " + s.name);
            }
            auto v = eval(*s.expr, scopes, depth);
            if (s.op == "=") b->value = v;
            else if (s.op == "+=") b->value = arith('+', b->value, v);
            else if (s.op == "-=") b->value = arith('-', b->value, v);
            else b->value = arith('*', b->value, v);
            return;
        }
        case Stmt::Kind::While:
            while (eval(*s.expr, scopes, depth) != 0) {
                tick();
                execBlock(s.body, scopes, depth);
            }
            return;
        case Stmt::Kind::If:
            if (eval(*s.expr, scopes, depth) != 0) {
                execBlock(s.body, scopes, depth);
            } else if (!s.orElse.empty()) {
                execBlock(s.orElse, scopes, depth);
            }
            return;
        case Stmt::Kind::Return: throw ReturnSignal{eval(*s.expr, scopes, depth)};
        case Stmt::Kind::ExprStmt: eval(*s.expr, scopes, depth); return;
        }
    }

    static std::int64_t arith(char op, std::int64_t a, std::int64_t b)
    {
        std::int64_t r = 0;
        bool overflow = false;
        switch (op) {
        case '+': overflow = __builtin_add_overflow(a, b, &r); break;
        case '-': overflow = __builtin_sub_overflow(a, b, &r); break;
        case '*': overflow = __builtin_mul_overflow(a, b, &r); break;
        case '/':
        case '%':
            if (b == 0) throw SwiftError("division by zero");
            if (a == std::numeric_limits<std::int64_t>::min() && b == -1) throw SwiftError("arithmetic overflow");
            r = op == '/' ? a / b : a % b;
            break;
        default: throw SwiftError(std::string("unknown operator ") + op);
        }
        if (overflow) throw SwiftError("arithmetic overflow");
        return r;
    }

    std::int64_t eval(const Expr& e, Scopes& scopes, int depth)
    {
        switch (e.kind) {
        case Expr::Kind::Number: return e.value;
        case Expr::Kind::Name: {
            if (e.name == "true") return 1;
            if (e.name == "false") return 0;
            auto* b = lookup(scopes, e.name);
            if (!b) throw SwiftError("line " + std::to_string(e.line) + ": undefined name " + e.name);
            return b->value;
        }
        case Expr::Kind::Unary: {
            auto v = eval(*e.args[0], scopes, depth);
            if (e.name == "!") return v == 0 ? 1 : 0;
            return arith('-', 0, v);
        }
        case Expr::Kind::Call: {
            std::vector<std::int64_t> args;
            for (const auto& a : e.args) args.push_back(eval(*a, scopes, depth));
            return call(e.name, args, depth + 1);
        }
        case Expr::Kind::Binary: {
            const auto& op = e.name;
            auto a = eval(*e.args[0], scopes, depth);
            if (op == "&&") return a != 0 && eval(*e.args[1], scopes, depth) != 0 ? 1 : 0;
            if (op == "||") return a != 0 || eval(*e.args[1], scopes, depth) != 0 ? 1 : 0;
            auto b = eval(*e.args[1], scopes, depth);
            if (op == "==") return a == b;
            if (op == "!=") return a != b;
            if (op == "<") return a < b;
            if (op == "<=") return a <= b;
            if (op == ">") return a > b;
            if (op == ">=") return a >= b;
            return arith(op[0], a, b);
        }
        }
        return 0;
    }

    const std::map<std::string, std::shared_ptr<SwiftSubset::Function>>& fns_;
    std::uint64_t limit_;
    std::uint64_t steps_ = 0;
};

void collectCalls(const Expr& e, std::set<std::string>& out)
{
    if (e.kind == Expr::Kind::Call) out.insert(e.name);
    for (const auto& a : e.args) collectCalls(*a, out);
}

void collectCalls(const std::vector<std::unique_ptr<Stmt>>& body, std::set<std::string>& out)
{
    for (const auto& s : body) {
        if (s->expr) collectCalls(*s->expr, out);
        collectCalls(s->body, out);
        collectCalls(s->orElse, out);
    }
}

}  // namespace

SwiftSubset::SwiftSubset(std::string_view source) : functions_(Parser(tokenize(source)).parseFile()) {}
SwiftSubset::~SwiftSubset() = default;
SwiftSubset::SwiftSubset(SwiftSubset&&) noexcept = default;
SwiftSubset& SwiftSubset::operator=(SwiftSubset&&) noexcept = default;

bool SwiftSubset::hasFunction(const std::string& name) const
{
    return functions_.contains(name);
}

std::vector<std::string> SwiftSubset::functionNames() const
{
    std::vector<std::string> out;
    for (const auto& [name, _] : functions_) out.push_back(name);
    return out;
}

std::int64_t SwiftSubset::call(const std::string& name, const std::vector<std::int64_t>& args,
                               std::uint64_t stepLimit) const
{
    return Interp(functions_, stepLimit).call(name, args, 0);
}

std::set<std::string> SwiftSubset::calledNames(const std::string& name) const
{
    auto it = functions_.find(name);
    if (it == functions_.end()) {
        throw SwiftError("no function named " + name);
    }
    std::set<std::string> out;
    collectCalls(it->second->body, out);
    return out;
}

std::int64_t gcdOracle(std::int64_t a, std::int64_t b)
{
    if (a < 1 || b < 1) {
        throw std::invalid_argument("gcdOracle needs positive arguments");
    }
    for (std::int64_t d = std::min(a, b); d > 1; --d) {
        if (a % d == 0 && b % d == 0) {
            return d;
        }
    }
    return 1;
}

std::int64_t lcmOracle(std::int64_t a, std::int64_t b)
{
    if (a < 1 || b < 1) {
        throw std::invalid_argument("lcmOracle needs positive arguments");
    }
    const std::int64_t step = std::max(a, b);
    std::int64_t m = step;
    while (m % a != 0 || m % b != 0) {
        m += step;
    }
    return m;
}

}  // namespace assist
