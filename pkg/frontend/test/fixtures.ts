/**
 * Payloads captured verbatim from a live service instance, so test
 * assertions compare the dashboard against real wire data: a noiseless
 * attack (identical panes, infinite budget), a consensus attack, and an
 * accountant table over an increasing mu ladder at fixed (T, p, delta).
 */

import type { AccountantResponse, AttackResponse } from "../src/types.js";

export const NOISELESS_ATTACK: AttackResponse = {
  "clip_norm": 100.0,
  "epsilon": "inf",
  "lambda_table": null,
  "lambda_used": 1.0,
  "lossy": {
    "noisy": false,
    "original": false,
    "reconstruction": false
  },
  "metrics": {
    "mse": 0.0,
    "ssim": 1.0
  },
  "mode": "single",
  "mu": "inf",
  "noisy_b64": "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAAA1klEQVR4nAXBW1LCQBAF0NszHYFKAVFR4UNdi/vfg1VahaCER0jIa2b6eo58zGeZ9U3dtGNMBHX1sJywvRw9aDSKPm6e59KWuacZDdBi/fo06fe5xBCiM2pebN6X8WUW21s7JEBlsrjH3Rurw+HSBaEbRgOA9Woxy5wArjqdIwDvvXcigDvuvj4J/FXdmIyAltOp1EX4+S6bIZHQk2P7O0+n7e46JAO0Zqj3U97Ox2sfSWiXxqbMOHa3LhgBHS326pFCCMkIamIKTkBLRgJQmokAIEGA+Adj95J1QcaLcAAAAABJRU5ErkJggg==",
  "noisy_metrics": {
    "mse": 0.0,
    "ssim": 1.0
  },
  "original_b64": "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAAA1klEQVR4nAXBW1LCQBAF0NszHYFKAVFR4UNdi/vfg1VahaCER0jIa2b6eo58zGeZ9U3dtGNMBHX1sJywvRw9aDSKPm6e59KWuacZDdBi/fo06fe5xBCiM2pebN6X8WUW21s7JEBlsrjH3Rurw+HSBaEbRgOA9Woxy5wArjqdIwDvvXcigDvuvj4J/FXdmIyAltOp1EX4+S6bIZHQk2P7O0+n7e46JAO0Zqj3U97Ox2sfSWiXxqbMOHa3LhgBHS326pFCCMkIamIKTkBLRgJQmokAIEGA+Adj95J1QcaLcAAAAABJRU5ErkJggg==",
  "reconstruction_b64": "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAAA1klEQVR4nAXBW1LCQBAF0NszHYFKAVFR4UNdi/vfg1VahaCER0jIa2b6eo58zGeZ9U3dtGNMBHX1sJywvRw9aDSKPm6e59KWuacZDdBi/fo06fe5xBCiM2pebN6X8WUW21s7JEBlsrjH3Rurw+HSBaEbRgOA9Woxy5wArjqdIwDvvXcigDvuvj4J/FXdmIyAltOp1EX4+S6bIZHQk2P7O0+n7e46JAO0Zqj3U97Ox2sfSWiXxqbMOHa3LhgBHS326pFCCMkIamIKTkBLRgJQmokAIEGA+Adj95J1QcaLcAAAAABJRU5ErkJggg==",
  "seed": 1,
  "sigma": 0.0,
  "t_start": 0
};

export const CONSENSUS_ATTACK: AttackResponse = {
  "clip_norm": 1.0,
  "consensus_b64": [
    "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAABG0lEQVR4nAEQAe/+AUD4NOD7BuA8lzAXIrgn3nEBAF3VEvwV/PEhwhT9D7sNOgICGOseMAkEH9oo3+PdTyADApDkHg4PIxkbzP89IRASJ+oCbuIeMQUMa/P3F98g16nlzAEIHw9E+w76EYMJ5g0rEgnTAkZMSOMG8CuaaQ4QCOcN3hECPa/S6gv4yxg5ThN8XsXjRgTI/Cbz0eAm2lX6Ot+TUN+gBO4FyPf0SgH3T7cJBj7tNNEC+itoE37LjDYHFta34BbVDQFh48JS4gz4x/tvF7ze6Qg+AgHdKb0oLD/7ANfhvjQOMNwBAABT/cBOtlnm2vIx/EW24gEAGC0K/LVhtOtM2gYHzzHYBEYEFdBV3Ao3AgoWJu8MVIqJ1XRMDQtrmQAAAABJRU5ErkJggg==",
    "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAABG0lEQVR4nAEQAe/+AQlCKfqTMtMb31rhP7kPvpQBAEop6SawNN4gnDwu+boVDwIA+bop9GnzFBxg6vPLEvcLBHP7KBUC6Ak5dvb5+jH0CPkCzeXxHyT0ZdEUYwI85xbqugLT2Rj4xR2e/ReWI70myhEAAi9B48bt1B3aLSrbLqJN6CgE1RXONPPIKb3gERARS9cX9AIr5iHL3CbpN93MBg7Q9UDuAtIK5c4DDwjsDzIHuuUmqRUCJ/j1HfbetDQ7/DjzauoLwgF62NIbKcwwoftA6NgOEhkZAsnkDd7DOq1mOcgjG1UE2QwCvfLRUNj+E/ojVgEKBjwy3wQ01UXY/eoApfYWLfIRuR3TAkYF0A5IvU4pGR0LHgAYISy0DnmWj7YEjQAAAABJRU5ErkJggg==",
    "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAABG0lEQVR4nAEQAe/+AUv9IL0b7/z+7hMDYLnZ4W8CtTPLLffXIQhd1uS8EuEUwwQUDxQ75f4f9O1Y4u67ARDYBLd1AvAHD0cHwzHo/TsS7vwEhi7xKPXp8xwOHRTb0//vHALT3QobsQzpx/Ka2A0XE3kYAukLCZj7TvMwLvUuT9dMyQEBSt0sAAfmO8skyORJ9u72DQI5Q8ctHDq3+7jOBefJLgbWBKEu5vTMAhEf4D4W5iitC+QC/fqMqxvpvbxA/cfNFxr1NwJOGZYb4+hfBJ88LCjEGP3rAQUoBc5WGPfJKPAuxy289DIBN8l987sk0Vfq/ujoU+zXIAEAGx3v9BnoDeweJ8Y19PbBApkcO00YFSwcFPPuLhW7VgDamICry05t1AAAAABJRU5ErkJggg=="
  ],
  "consensus_consistency": {
    "metric": "mse",
    "value": 0.02680824524483065
  },
  "epsilon": 389.8733688961496,
  "lambda_table": null,
  "lambda_used": 2.9259677195499973,
  "lossy": {
    "noisy": true,
    "original": false,
    "reconstruction": true
  },
  "metrics": {
    "mse": 0.03224491132006128,
    "ssim": 0.4047558671741565
  },
  "mode": "consensus",
  "mu": 20.0,
  "noisy_b64": "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAABG0lEQVR4nAEQAe/+AAASXDwAKQ8mACAeTyAnAGgBAEjV+RMCH+EvphbqMc8IFAEAS/Y3Ebz5/w31wQAAAAwDBGuxJAbdPfr7kk8NDxj5D98EtSPuKgDxZYgLFAIiwgv1AALg7z4l7EqU+fGU8cIV9UMaASMx/gcUAx7a2P/FJddH0QMBMPAERuXcKqtksgNQ/LQTEQIl9QHs6SHtAJzq896bKQ7VABUaABEcNTsANgAPIhQQHgAC6/M6AkLqxQYdFfXeMioPJABKMwAyGxEyFgBPOxAHHQAgAsLUAM4jNfX9AOAW8DnjCAMC9PkbNcUB2UMZ7togGWch6wAAABURExUnAAA+NABFAAsAAjQUJx4FBhoPD9n/NxgSOQAMClqPSryFTwAAAABJRU5ErkJggg==",
  "noisy_metrics": {
    "mse": 0.021421466746233773,
    "ssim": 0.4400330430895837
  },
  "original_b64": "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAAAoklEQVR4nGWOUWvCQBCEv71sUrUgtQUR6v//ayJoaaqmudzdbh9Oseg+DMzHzDKybtpOpUwpGw5o6BbLRTOezmM2cVCdrTYf7c+eUgDQZvb2ue2Odhkmc0BF58v3l/LaBakJL2kc8jBl9wpK7Hel7Q9DuoHxy/vw25+TOYBa9PQtOcbsdYcRcxArZtcK5ga4Q624XN9XRXHkbkH/G4DAwz2BP586WJNkqPqBAAAAAElFTkSuQmCC",
  "reconstruction_b64": "iVBORw0KGgoAAAANSUhEUgAAABAAAAAQCAAAAAA6mKC9AAABG0lEQVR4nAEQAe/+AUAIJOD08/j+1zALP7kPvpQCwBXHBgD/Jhlk0P7PJb4UrQQCGNAz7ez7B/1Yzv7ZL/oJApDkFfgNIxUksPT86R0iJOoCrvoaKBv2WfMUHhI608DqzAETGT1IvxP67Mzl9Asf7S7TAi9BCazt8AXaNA4CLshL3g8CCLre9g3N8f0BDAYYVdMIEQIJFvYW7RjR957MBQfGEAbXASQj5AoLJ+XX/hET9Qf/8AcCFwVhDBvXtCQ9/NbZHA4LAAFv49Ad//Yrpvtv2OjxAPs0AtTbD9YYOgYpOdcg7EME/fsBAABTGqNOwk3vAunoOgXX+AQAGPLyC9YEqOszEPHszR3OAnofGg4t80cwKQAFLhUYVBLktnbFBQrw6gAAAABJRU5ErkJggg==",
  "seed": 4,
  "sigma": 0.05,
  "t_start": 42
};

/** mu 1, 2, 5, 10, 20 at T = 1000, p = 0.01, delta = 1e-5. */
export const ACCOUNTANT_LADDER: AccountantResponse[] = [
  {
    "mu": 1.0,
    "epsilon": 2.538347545458933,
    "best_order": 8,
    "delta": 1e-05
  },
  {
    "mu": 2.0,
    "epsilon": 16.85842777931549,
    "best_order": 2,
    "delta": 1e-05
  },
  {
    "mu": 5.0,
    "epsilon": 15801.172692354327,
    "best_order": 2,
    "delta": 1e-05
  },
  {
    "mu": 10.0,
    "epsilon": 90801.17255348877,
    "best_order": 2,
    "delta": 1e-05
  },
  {
    "mu": 20.0,
    "epsilon": 390801.1725534887,
    "best_order": 2,
    "delta": 1e-05
  }
];
