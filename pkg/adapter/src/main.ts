import { serve } from "./serve";

const jobDir = process.argv[2];
if (!jobDir) {
  process.stderr.write("usage: main.js <job_dir>\n");
  process.exit(2);
}
process.exit(serve(jobDir));
