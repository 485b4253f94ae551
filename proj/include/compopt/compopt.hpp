#pragma once

#include "compopt/accounting.hpp"
#include "compopt/baselines.hpp"
#include "compopt/estimators.hpp"
#include "compopt/harness.hpp"
#include "compopt/problem.hpp"
#include "compopt/problems.hpp"
#include "compopt/prox.hpp"
#include "compopt/rng.hpp"
#include "compopt/scvrg.hpp"
#include "compopt/types.hpp"
#include "compopt/verify.hpp"
