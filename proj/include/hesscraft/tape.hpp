#pragma once

// Tape: the recorded sequence of elemental operations that defines a scalar
// function, plus the forward sweep that fills in values and local partials.

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hesscraft {

enum class Op : std::uint8_t {
    Input,
    Const,     // payload: the constant value
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Scale,     // payload: multiplier
    AddConst,  // payload: addend
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Square,
    PowConst,  // payload: exponent
    Tanh,
};

constexpr int arity(Op op) {
    switch (op) {
        case Op::Input:
        case Op::Const: return 0;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: return 2;
        default: return 1;
    }
}

constexpr std::string_view op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Const: return "const";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Div: return "div";
        case Op::Neg: return "neg";
        case Op::Scale: return "scale";
        case Op::AddConst: return "addconst";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Exp: return "exp";
        case Op::Ln: return "ln";
        case Op::Sqrt: return "sqrt";
        case Op::Square: return "square";
        case Op::PowConst: return "powconst";
        case Op::Tanh: return "tanh";
    }
    return "?";
}

constexpr bool op_has_payload(Op op) {
    return op == Op::Const || op == Op::Scale || op == Op::AddConst || op == Op::PowConst;
}

struct RecordError : std::runtime_error {
    explicit RecordError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric or domain failure during a sweep; carries the offending node.
struct EvalError : std::runtime_error {
    int node_id;
    EvalError(const std::string& msg, int node)
        : std::runtime_error(msg + " (node " + std::to_string(node) + ")"), node_id(node) {}
};

struct TapeNode {
    Op op = Op::Input;
    std::int32_t pred[2] = {-1, -1};
    double payload = 0.0;
    // Filled by the forward sweep:
    double value = 0.0;
    double d1[2] = {0.0, 0.0};     // per-predecessor first partials
    double d2[3] = {0.0, 0.0, 0.0};  // binary: (aa, ab, bb); unary: slot 0

    int num_preds() const { return arity(op); }
};

// Structural nonzero flags: whether a partial is nonzero as a function,
// independent of the evaluation point. Payload-aware (Scale(0), PowConst(0|1)).
inline bool d1_structural(const TapeNode& nd, int k) {
    switch (nd.op) {
        case Op::Input:
        case Op::Const: return false;
        case Op::Scale: return nd.payload != 0.0;
        case Op::PowConst: return nd.payload != 0.0;
        default: return k < arity(nd.op);
    }
}

inline bool d2_structural(const TapeNode& nd, int slot) {
    switch (nd.op) {
        case Op::Mul: return slot == 1;             // only the cross term
        case Op::Div: return slot == 1 || slot == 2;  // -1/b^2 and 2a/b^3
        case Op::Sin:
        case Op::Cos:
        case Op::Exp:
        case Op::Ln:
        case Op::Sqrt:
        case Op::Square:
        case Op::Tanh: return slot == 0;
        case Op::PowConst: return slot == 0 && nd.payload != 0.0 && nd.payload != 1.0;
        default: return false;
    }
}

inline bool op_is_linear(const TapeNode& nd) {
    return !d2_structural(nd, 0) && !d2_structural(nd, 1) && !d2_structural(nd, 2);
}

/// Finalized computational graph: inputs first, intermediates in topological
/// (= creation) order, the dependent as the last node.
class Tape {
public:
    int n() const { return n_; }
    int ell() const { return static_cast<int>(nodes_.size()) - n_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    int output() const { return size() - 1; }

    const TapeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    std::span<const TapeNode> nodes() const { return nodes_; }

    bool swept() const { return swept_; }
    /// f(x) from the last forward sweep.
    double value() const {
        require_swept();
        return nodes_.back().value;
    }
    void require_swept() const {
        if (!swept_) throw std::logic_error("tape has not been swept at a point yet");
    }

private:
    friend class TapeBuilder;
    friend double forward_sweep(Tape&, std::span<const double>);

    int n_ = 0;
    std::vector<TapeNode> nodes_;
    bool swept_ = false;
};

/// Records elemental operations; finalize() compacts to a Tape.
///
/// The raw interface rejects binary nodes with repeated predecessors; the Var
/// expression layer normalizes those (x+x -> 2x, x*x -> x^2, ...) before they
/// reach this point.
class TapeBuilder {
public:
    explicit TapeBuilder(int n_inputs) {
        if (n_inputs <= 0) throw RecordError("a tape needs at least one input");
        nodes_.resize(static_cast<std::size_t>(n_inputs));
        for (auto& nd : nodes_) nd.op = Op::Input;
        n_ = n_inputs;
    }

    int n() const { return n_; }
    int size() const { return static_cast<int>(nodes_.size()); }

    int add_node(Op op, int a = -1, int b = -1, double payload = 0.0) {
        const int ar = arity(op);
        const int id = size();
        if (op == Op::Input) throw RecordError("inputs are declared in the constructor");
        if (ar >= 1 && (a < 0 || a >= id)) throw RecordError("bad predecessor id");
        if (ar == 2 && (b < 0 || b >= id)) throw RecordError("bad predecessor id");
        if (ar == 2 && a == b)
            throw RecordError("binary node with repeated predecessor; normalize first");
        if (op == Op::Div && b < 0) throw RecordError("div needs two predecessors");
        TapeNode nd;
        nd.op = op;
        nd.pred[0] = ar >= 1 ? a : -1;
        nd.pred[1] = ar == 2 ? b : -1;
        nd.payload = payload;
        nodes_.push_back(nd);
        return id;
    }

    /// Compacts to a Tape with `output_id` as the final node. Unreachable
    /// intermediates are dropped (inputs are always kept); a bare input output
    /// is wrapped in Scale(1) so the dependent is a proper intermediate.
    Tape finalize(int output_id) {
        if (output_id < 0 || output_id >= size()) throw RecordError("no valid output designated");
        if (nodes_[static_cast<std::size_t>(output_id)].op == Op::Input)
            output_id = add_node(Op::Scale, output_id, -1, 1.0);

        // Mark what the output reaches; creation order restricted to the kept
        // set stays topological, so compaction is a stable filter + renumber.
        std::vector<char> keep(nodes_.size(), 0);
        for (int i = 0; i < n_; ++i) keep[static_cast<std::size_t>(i)] = 1;
        keep[static_cast<std::size_t>(output_id)] = 1;
        for (int i = output_id; i >= n_; --i) {
            if (!keep[static_cast<std::size_t>(i)]) continue;
            const TapeNode& nd = nodes_[static_cast<std::size_t>(i)];
            for (int k = 0; k < nd.num_preds(); ++k) keep[static_cast<std::size_t>(nd.pred[k])] = 1;
        }

        Tape t;
        t.n_ = n_;
        std::vector<std::int32_t> remap(nodes_.size(), -1);
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            if (!keep[i] || static_cast<int>(i) > output_id) continue;
            remap[i] = static_cast<std::int32_t>(t.nodes_.size());
            TapeNode nd = nodes_[i];
            for (int k = 0; k < nd.num_preds(); ++k) nd.pred[k] = remap[static_cast<std::size_t>(nd.pred[k])];
            t.nodes_.push_back(nd);
        }
        if (t.nodes_.size() == static_cast<std::size_t>(n_))
            throw RecordError("output does not name an intermediate node");
        return t;
    }

private:
    int n_ = 0;
    std::vector<TapeNode> nodes_;
};

// ---------------------------------------------------------------------------
// Expression layer: operator overloading over builder node handles.

class Var {
public:
    Var() = default;
    Var(TapeBuilder* b, int id) : builder_(b), id_(id) {}
    TapeBuilder* builder() const { return builder_; }
    int id() const { return id_; }

private:
    TapeBuilder* builder_ = nullptr;
    int id_ = -1;
};

inline Var make_input(TapeBuilder& b, int k) {
    if (k < 0 || k >= b.n()) throw RecordError("input index out of range");
    return Var(&b, k);
}

inline std::vector<Var> make_inputs(TapeBuilder& b) {
    std::vector<Var> xs;
    xs.reserve(static_cast<std::size_t>(b.n()));
    for (int k = 0; k < b.n(); ++k) xs.emplace_back(&b, k);
    return xs;
}

inline Var make_constant(TapeBuilder& b, double c) {
    return Var(&b, b.add_node(Op::Const, -1, -1, c));
}

namespace detail {
inline TapeBuilder& same_builder(Var a, Var b) {
    if (a.builder() == nullptr || a.builder() != b.builder())
        throw RecordError("operands belong to different tapes");
    return *a.builder();
}
inline TapeBuilder& builder_of(Var a) {
    if (a.builder() == nullptr) throw RecordError("uninitialized expression handle");
    return *a.builder();
}
}  // namespace detail

inline Var operator+(Var a, Var b) {
    TapeBuilder& t = detail::same_builder(a, b);
    if (a.id() == b.id()) return Var(&t, t.add_node(Op::Scale, a.id(), -1, 2.0));
    return Var(&t, t.add_node(Op::Add, a.id(), b.id()));
}
inline Var operator-(Var a, Var b) {
    TapeBuilder& t = detail::same_builder(a, b);
    if (a.id() == b.id()) return Var(&t, t.add_node(Op::Scale, a.id(), -1, 0.0));
    return Var(&t, t.add_node(Op::Sub, a.id(), b.id()));
}
inline Var operator*(Var a, Var b) {
    TapeBuilder& t = detail::same_builder(a, b);
    if (a.id() == b.id()) return Var(&t, t.add_node(Op::Square, a.id()));
    return Var(&t, t.add_node(Op::Mul, a.id(), b.id()));
}
inline Var operator/(Var a, Var b) {
    TapeBuilder& t = detail::same_builder(a, b);
    if (a.id() == b.id()) {
        // x/x: keep the pole at x=0 instead of folding to 1
        const int inv = t.add_node(Op::PowConst, b.id(), -1, -1.0);
        return Var(&t, t.add_node(Op::Mul, a.id(), inv));
    }
    return Var(&t, t.add_node(Op::Div, a.id(), b.id()));
}
inline Var operator-(Var a) {
    TapeBuilder& t = detail::builder_of(a);
    return Var(&t, t.add_node(Op::Neg, a.id()));
}

// Scalar constants fold into op payloads, never into graph nodes.
inline Var operator+(Var a, double c) {
    TapeBuilder& t = detail::builder_of(a);
    return Var(&t, t.add_node(Op::AddConst, a.id(), -1, c));
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return (-a) + c; }
inline Var operator*(Var a, double c) {
    TapeBuilder& t = detail::builder_of(a);
    return Var(&t, t.add_node(Op::Scale, a.id(), -1, c));
}
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) {
    if (c == 0.0) throw RecordError("division by constant zero");
    return a * (1.0 / c);
}
inline Var operator/(double c, Var a) {
    TapeBuilder& t = detail::builder_of(a);
    const int inv = t.add_node(Op::PowConst, a.id(), -1, -1.0);
    return Var(&t, t.add_node(Op::Scale, inv, -1, c));
}

inline Var sin(Var a) { return Var(a.builder(), detail::builder_of(a).add_node(Op::Sin, a.id())); }
inline Var cos(Var a) { return Var(a.builder(), detail::builder_of(a).add_node(Op::Cos, a.id())); }
inline Var exp(Var a) { return Var(a.builder(), detail::builder_of(a).add_node(Op::Exp, a.id())); }
inline Var log(Var a) { return Var(a.builder(), detail::builder_of(a).add_node(Op::Ln, a.id())); }
inline Var sqrt(Var a) { return Var(a.builder(), detail::builder_of(a).add_node(Op::Sqrt, a.id())); }
inline Var sqr(Var a) { return Var(a.builder(), detail::builder_of(a).add_node(Op::Square, a.id())); }
inline Var tanh(Var a) { return Var(a.builder(), detail::builder_of(a).add_node(Op::Tanh, a.id())); }
inline Var pow(Var a, double p) {
    TapeBuilder& t = detail::builder_of(a);
    if (p == 0.0) return make_constant(t, 1.0);
    if (p == 1.0) return a;
    if (p == 2.0) return sqr(a);
    return Var(&t, t.add_node(Op::PowConst, a.id(), -1, p));
}

/// Record `body(inputs) -> Var` into a finalized tape.
template <class F>
Tape record(int n_inputs, F&& body) {
    TapeBuilder b(n_inputs);
    std::vector<Var> xs = make_inputs(b);
    Var out = body(std::span<const Var>(xs));
    if (out.builder() != &b) throw RecordError("program output was not built on this tape");
    return b.finalize(out.id());
}

// ---------------------------------------------------------------------------
// Forward sweep

/// Evaluates every node at x: values plus the closed-form first and second
/// local partials each elemental exposes. Returns f(x).
inline double forward_sweep(Tape& tape, std::span<const double> x) {
    if (static_cast<int>(x.size()) != tape.n())
        throw std::invalid_argument("point dimension does not match tape inputs");
    for (int i = 0; i < tape.n(); ++i) {
        if (!std::isfinite(x[static_cast<std::size_t>(i)])) throw EvalError("non-finite input", i);
        tape.nodes_[static_cast<std::size_t>(i)].value = x[static_cast<std::size_t>(i)];
    }

    const int total = tape.size();
    for (int i = tape.n(); i < total; ++i) {
        TapeNode& nd = tape.nodes_[static_cast<std::size_t>(i)];
        const double a = nd.pred[0] >= 0 ? tape.nodes_[static_cast<std::size_t>(nd.pred[0])].value : 0.0;
        const double b = nd.pred[1] >= 0 ? tape.nodes_[static_cast<std::size_t>(nd.pred[1])].value : 0.0;
        nd.d1[0] = nd.d1[1] = 0.0;
        nd.d2[0] = nd.d2[1] = nd.d2[2] = 0.0;
        switch (nd.op) {
            case Op::Input: break;
            case Op::Const: nd.value = nd.payload; break;
            case Op::Add:
                nd.value = a + b;
                nd.d1[0] = 1.0;
                nd.d1[1] = 1.0;
                break;
            case Op::Sub:
                nd.value = a - b;
                nd.d1[0] = 1.0;
                nd.d1[1] = -1.0;
                break;
            case Op::Mul:
                nd.value = a * b;
                nd.d1[0] = b;
                nd.d1[1] = a;
                nd.d2[1] = 1.0;
                break;
            case Op::Div: {
                if (b == 0.0) throw EvalError("division by zero", i);
                nd.value = a / b;
                nd.d1[0] = 1.0 / b;
                nd.d1[1] = -a / (b * b);
                nd.d2[1] = -1.0 / (b * b);
                nd.d2[2] = 2.0 * a / (b * b * b);
                break;
            }
            case Op::Neg:
                nd.value = -a;
                nd.d1[0] = -1.0;
                break;
            case Op::Scale:
                nd.value = nd.payload * a;
                nd.d1[0] = nd.payload;
                break;
            case Op::AddConst:
                nd.value = a + nd.payload;
                nd.d1[0] = 1.0;
                break;
            case Op::Sin:
                nd.value = std::sin(a);
                nd.d1[0] = std::cos(a);
                nd.d2[0] = -nd.value;
                break;
            case Op::Cos:
                nd.value = std::cos(a);
                nd.d1[0] = -std::sin(a);
                nd.d2[0] = -nd.value;
                break;
            case Op::Exp:
                nd.value = std::exp(a);
                nd.d1[0] = nd.value;
                nd.d2[0] = nd.value;
                break;
            case Op::Ln:
                if (a <= 0.0) throw EvalError("log of non-positive value", i);
                nd.value = std::log(a);
                nd.d1[0] = 1.0 / a;
                nd.d2[0] = -1.0 / (a * a);
                break;
            case Op::Sqrt:
                if (a < 0.0) throw EvalError("sqrt of negative value", i);
                nd.value = std::sqrt(a);
                nd.d1[0] = 0.5 / nd.value;
                nd.d2[0] = -0.25 / (nd.value * a);
                break;
            case Op::Square:
                nd.value = a * a;
                nd.d1[0] = 2.0 * a;
                nd.d2[0] = 2.0;
                break;
            case Op::PowConst: {
                const double p = nd.payload;
                nd.value = std::pow(a, p);
                nd.d1[0] = p * std::pow(a, p - 1.0);
                nd.d2[0] = p * (p - 1.0) * std::pow(a, p - 2.0);
                break;
            }
            case Op::Tanh: {
                nd.value = std::tanh(a);
                const double sech2 = 1.0 - nd.value * nd.value;
                nd.d1[0] = sech2;
                nd.d2[0] = -2.0 * nd.value * sech2;
                break;
            }
        }
        if (!std::isfinite(nd.value)) throw EvalError("non-finite value", i);
        for (int k = 0; k < nd.num_preds(); ++k)
            if (!std::isfinite(nd.d1[k])) throw EvalError("non-finite first partial", i);
        const int slots = nd.num_preds() == 2 ? 3 : (nd.num_preds() == 1 ? 1 : 0);
        for (int s = 0; s < slots; ++s)
            if (!std::isfinite(nd.d2[s])) throw EvalError("non-finite second partial", i);
    }
    tape.swept_ = true;
    return tape.nodes_.back().value;
}

// ---------------------------------------------------------------------------
// Debug text serialization: one node per line, `id op pred0 [pred1] [payload]`.
// No stability guarantee across versions.

inline void dump_tape(const Tape& tape, std::ostream& os) {
    for (int i = 0; i < tape.size(); ++i) {
        const TapeNode& nd = tape.node(i);
        os << i << ' ' << op_name(nd.op);
        for (int k = 0; k < nd.num_preds(); ++k) os << ' ' << nd.pred[k];
        if (op_has_payload(nd.op)) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", nd.payload);
            os << ' ' << buf;
        }
        os << '\n';
    }
}

inline Op op_from_name(const std::string& name) {
    for (int raw = 0; raw <= static_cast<int>(Op::Tanh); ++raw) {
        const Op op = static_cast<Op>(raw);
        if (op_name(op) == name) return op;
    }
    throw RecordError("unknown op name '" + name + "'");
}

inline Tape parse_tape(std::istream& is) {
    struct Line {
        Op op;
        int a, b;
        double payload;
    };
    std::vector<Line> lines;
    int n_inputs = 0;
    std::string text;
    int lineno = 0;
    while (std::getline(is, text)) {
        ++lineno;
        std::istringstream ls(text);
        long long id = -1;
        std::string name;
        if (!(ls >> id >> name)) {
            if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw RecordError("tape line " + std::to_string(lineno) + ": expected `id op ...`");
        }
        if (id != static_cast<long long>(lines.size()))
            throw RecordError("tape line " + std::to_string(lineno) + ": ids must be sequential");
        Line ln{op_from_name(name), -1, -1, 0.0};
        for (int k = 0; k < arity(ln.op); ++k) {
            int* slot = k == 0 ? &ln.a : &ln.b;
            if (!(ls >> *slot)) throw RecordError("tape line " + std::to_string(lineno) + ": missing predecessor");
        }
        if (op_has_payload(ln.op) && !(ls >> ln.payload))
            throw RecordError("tape line " + std::to_string(lineno) + ": missing payload");
        if (ln.op == Op::Input) {
            if (static_cast<long long>(lines.size()) != n_inputs)
                throw RecordError("tape line " + std::to_string(lineno) + ": inputs must come first");
            ++n_inputs;
        }
        lines.push_back(ln);
    }
    if (n_inputs == 0) throw RecordError("tape file declares no inputs");
    if (lines.size() == static_cast<std::size_t>(n_inputs))
        throw RecordError("tape file has no intermediate nodes");
    TapeBuilder b(n_inputs);
    for (std::size_t i = static_cast<std::size_t>(n_inputs); i < lines.size(); ++i)
        b.add_node(lines[i].op, lines[i].a, lines[i].b, lines[i].payload);
    return b.finalize(static_cast<int>(lines.size()) - 1);
}

}  // namespace hesscraft
