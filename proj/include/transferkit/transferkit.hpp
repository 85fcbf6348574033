#pragma once

#include "budget.hpp"
#include "chain_model.hpp"
#include "density_matrix.hpp"
#include "errors.hpp"
#include "model_io.hpp"
#include "operator_core.hpp"
#include "oracles.hpp"
#include "sweep.hpp"
#include "thermo.hpp"
#include "transfer.hpp"
