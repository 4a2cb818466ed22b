#pragma once

#include "hesscraft/bench.hpp"
#include "hesscraft/crosscheck.hpp"
#include "hesscraft/edge_pushing.hpp"
#include "hesscraft/gradient.hpp"
#include "hesscraft/graph_model.hpp"
#include "hesscraft/oracles.hpp"
#include "hesscraft/sparse.hpp"
#include "hesscraft/tape.hpp"
