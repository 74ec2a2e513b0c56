#pragma once

#include "erm_lab/cli.hpp"
#include "erm_lab/empirical_process.hpp"
#include "erm_lab/errors.hpp"
#include "erm_lab/gaussian_process.hpp"
#include "erm_lab/measure.hpp"
#include "erm_lab/problem_gen.hpp"
#include "erm_lab/theorems.hpp"
