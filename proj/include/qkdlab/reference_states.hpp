#pragma once

// Closed-form reference states for the compensating attack at theta = pi/4.
//
// These are literal transcriptions of the displayed joint states of Alice,
// Bob, the carrier and Eve at every stage of rounds 1-5, parametrized by the
// key bits sent so far. They are deliberately independent of the simulator:
// the regression harness drives the simulator through the same pipeline and
// compares against these by phase-invariant fidelity.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "qkdlab/qstate.hpp"

namespace qkdlab::reference {

// Pipeline checkpoints within one round. The measurement inside an
// extraction round is deterministic at theta = pi/4, so the disentangle /
// restore stages bracket it without branching.
enum class Stage {
    RoundBegin,           // after the bilateral (and compensating) rotations
    AfterCarrierAttach,
    AfterEncodeCnot,      // Alice's CNOT onto the carrier
    AfterEveProgram,      // pass-through rounds: Eve's full program
    AfterEveDisentangle,  // extraction rounds: first ancilla-controlled CNOT
    AfterEveRestore,      // extraction rounds: after measure + second CNOT
    AfterDecodeCnot,      // Bob's CNOT
    RoundEnd,             // after Bob's measurement and carrier discard
};

inline const char* to_string(Stage stage) {
    switch (stage) {
        case Stage::RoundBegin: return "round_begin";
        case Stage::AfterCarrierAttach: return "after_carrier_attach";
        case Stage::AfterEncodeCnot: return "after_encode_cnot";
        case Stage::AfterEveProgram: return "after_eve_program";
        case Stage::AfterEveDisentangle: return "after_eve_disentangle";
        case Stage::AfterEveRestore: return "after_eve_restore";
        case Stage::AfterDecodeCnot: return "after_decode_cnot";
        case Stage::RoundEnd: return "round_end";
    }
    return "?";
}

namespace detail {

struct Term3 { double coeff; int a, b, e; };
struct Term4 { double coeff; int a, b, c, e; };

inline StateVector build3(std::span<const Term3> terms) {
    std::vector<Amplitude> amps(8, Amplitude{0.0, 0.0});
    for (const auto& t : terms)
        amps[static_cast<std::size_t>(t.a * 4 + t.b * 2 + t.e)] += t.coeff;
    return StateVector(RegisterLayout{"A", "B", "E"}, std::move(amps));
}

inline StateVector build4(std::span<const Term4> terms) {
    std::vector<Amplitude> amps(16, Amplitude{0.0, 0.0});
    for (const auto& t : terms)
        amps[static_cast<std::size_t>(t.a * 8 + t.b * 4 + t.c * 2 + t.e)] += t.coeff;
    return StateVector(RegisterLayout{"A", "B", "C", "E"}, std::move(amps));
}

} // namespace detail

// Maps the duplicated checkpoints onto their canonical expression: the state
// after Bob's decode CNOT (and after the carrier discard, up to the carrier
// factor) repeats earlier stages, and Eve's restore CNOT undoes her
// disentangle CNOT.
inline Stage canonical_stage(int round, Stage stage) {
    if (round >= 2) {
        if (stage == Stage::AfterDecodeCnot) return Stage::AfterCarrierAttach;
        if (stage == Stage::RoundEnd) return Stage::RoundBegin;
    }
    if (stage == Stage::AfterEveRestore) return Stage::AfterEncodeCnot;
    return stage;
}

// The reference state for (round, stage) given the key bits psi_1..psi_round.
// Valid only at theta = pi/4, where the closed forms hold.
inline StateVector stage_state(int round, Stage stage, std::span<const int> psi) {
    using detail::Term3;
    using detail::Term4;
    using detail::build3;
    using detail::build4;

    if (round < 1 || round > 5)
        throw ConfigError("reference states cover rounds 1..5 only");
    if (static_cast<int>(psi.size()) < round)
        throw ConfigError("reference stage needs key bits psi_1..psi_round");
    stage = canonical_stage(round, stage);

    const double r = 1.0 / std::sqrt(2.0);
    const double h = 0.5;
    const double q = 1.0 / (2.0 * std::sqrt(2.0));
    const int p1 = psi[0];
    const double s = p1 == 0 ? 1.0 : -1.0;     // (-1)^psi_1
    const double al = p1 == 0 ? 2.0 : 0.0;     // 1 + (-1)^psi_1
    const double be = p1 == 0 ? 0.0 : 2.0;     // 1 - (-1)^psi_1
    const int p = psi[static_cast<std::size_t>(round - 1)];
    const int pf = 1 - p;

    switch (round) {
        case 1: {
            switch (stage) {
                case Stage::RoundBegin: {
                    const Term3 t[] = {{r, 0, 0, 0}, {r, 1, 1, 0}};
                    return build3(t);
                }
                case Stage::AfterCarrierAttach: {
                    const Term4 t[] = {{r, 0, 0, p, 0}, {r, 1, 1, p, 0}};
                    return build4(t);
                }
                case Stage::AfterEncodeCnot: {
                    const Term4 t[] = {{r, 0, 0, p, 0}, {r, 1, 1, pf, 0}};
                    return build4(t);
                }
                case Stage::AfterEveProgram: {
                    const Term4 t[] = {{r, 0, 0, p, p}, {r, 1, 1, pf, pf}};
                    return build4(t);
                }
                case Stage::AfterDecodeCnot: {
                    const Term4 t[] = {{r, 0, 0, p, p}, {r, 1, 1, p, pf}};
                    return build4(t);
                }
                case Stage::RoundEnd: {
                    const Term3 t[] = {{r, 0, 0, p}, {r, 1, 1, pf}};
                    return build3(t);
                }
                default: break;
            }
            break;
        }
        case 2: {
            switch (stage) {
                case Stage::RoundBegin: {
                    const Term3 t[] = {{h, 0, 0, 0}, {h * s, 0, 1, 1}, {h * s, 1, 0, 1}, {h, 1, 1, 0}};
                    return build3(t);
                }
                case Stage::AfterCarrierAttach: {
                    const Term4 t[] = {{h, 0, 0, p, 0}, {h * s, 0, 1, p, 1},
                                       {h * s, 1, 0, p, 1}, {h, 1, 1, p, 0}};
                    return build4(t);
                }
                case Stage::AfterEncodeCnot: {
                    const Term4 t[] = {{h, 0, 0, p, 0}, {h * s, 0, 1, p, 1},
                                       {h * s, 1, 0, pf, 1}, {h, 1, 1, pf, 0}};
                    return build4(t);
                }
                case Stage::AfterEveProgram: {
                    const Term4 t[] = {{h, 0, 0, p, 0}, {h * s, 0, 1, pf, 1},
                                       {h * s, 1, 0, p, 1}, {h, 1, 1, pf, 0}};
                    return build4(t);
                }
                default: break;
            }
            break;
        }
        case 3: {
            switch (stage) {
                case Stage::RoundBegin: {
                    const Term3 t[] = {{q * al, 0, 0, 0}, {-q * al, 1, 1, 1},
                                       {-q * be, 0, 0, 1}, {q * be, 1, 1, 0}};
                    return build3(t);
                }
                case Stage::AfterCarrierAttach: {
                    const Term4 t[] = {{q * al, 0, 0, p, 0}, {-q * al, 1, 1, p, 1},
                                       {-q * be, 0, 0, p, 1}, {q * be, 1, 1, p, 0}};
                    return build4(t);
                }
                case Stage::AfterEncodeCnot: {
                    const Term4 t[] = {{q * al, 0, 0, p, 0}, {-q * al, 1, 1, pf, 1},
                                       {-q * be, 0, 0, p, 1}, {q * be, 1, 1, pf, 0}};
                    return build4(t);
                }
                case Stage::AfterEveDisentangle: {
                    const Term4 t[] = {{q * al, 0, 0, p, 0}, {-q * al, 1, 1, p, 1},
                                       {-q * be, 0, 0, pf, 1}, {q * be, 1, 1, pf, 0}};
                    return build4(t);
                }
                default: break;
            }
            break;
        }
        case 4: {
            switch (stage) {
                case Stage::RoundBegin: {
                    const Term3 t[] = {{-h, 0, 0, 1}, {-h * s, 0, 1, 0}, {-h * s, 1, 0, 0}, {-h, 1, 1, 1}};
                    return build3(t);
                }
                case Stage::AfterCarrierAttach: {
                    const Term4 t[] = {{-h, 0, 0, p, 1}, {-h * s, 0, 1, p, 0},
                                       {-h * s, 1, 0, p, 0}, {-h, 1, 1, p, 1}};
                    return build4(t);
                }
                case Stage::AfterEncodeCnot: {
                    const Term4 t[] = {{-h, 0, 0, p, 1}, {-h * s, 0, 1, p, 0},
                                       {-h * s, 1, 0, pf, 0}, {-h, 1, 1, pf, 1}};
                    return build4(t);
                }
                case Stage::AfterEveProgram: {
                    const Term4 t[] = {{-h, 0, 0, p, 1}, {-h * s, 0, 1, pf, 0},
                                       {-h * s, 1, 0, p, 0}, {-h, 1, 1, pf, 1}};
                    return build4(t);
                }
                default: break;
            }
            break;
        }
        case 5: {
            switch (stage) {
                case Stage::RoundBegin: {
                    const Term3 t[] = {{-q * al, 0, 0, 0}, {-q * al, 1, 1, 1},
                                       {-q * be, 0, 0, 1}, {-q * be, 1, 1, 0}};
                    return build3(t);
                }
                case Stage::AfterCarrierAttach: {
                    const Term4 t[] = {{-q * al, 0, 0, p, 0}, {-q * al, 1, 1, p, 1},
                                       {-q * be, 0, 0, p, 1}, {-q * be, 1, 1, p, 0}};
                    return build4(t);
                }
                case Stage::AfterEncodeCnot: {
                    const Term4 t[] = {{-q * al, 0, 0, p, 0}, {-q * al, 1, 1, pf, 1},
                                       {-q * be, 0, 0, p, 1}, {-q * be, 1, 1, pf, 0}};
                    return build4(t);
                }
                case Stage::AfterEveDisentangle: {
                    const Term4 t[] = {{-q * al, 0, 0, p, 0}, {-q * al, 1, 1, p, 1},
                                       {-q * be, 0, 0, pf, 1}, {-q * be, 1, 1, pf, 0}};
                    return build4(t);
                }
                default: break;
            }
            break;
        }
    }
    throw ConfigError(std::string("no reference state for round ") + std::to_string(round) +
                      " stage " + to_string(stage));
}

} // namespace qkdlab::reference
