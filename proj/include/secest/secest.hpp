#pragma once

#include "secest/model.hpp"
#include "secest/random.hpp"
#include "secest/simulator.hpp"
#include "secest/attacker.hpp"
#include "secest/secekf.hpp"
#include "secest/secopt.hpp"
#include "secest/eval.hpp"
#include "secest/log_io.hpp"
#include "secest/scenario.hpp"
#include "secest/pipeline.hpp"
