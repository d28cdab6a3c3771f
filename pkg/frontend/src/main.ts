import { ReviewClient } from './api';
import { ReviewApp } from './app';
import './styles.css';

function getToken(): string {
  const stored = window.localStorage.getItem('review_token');
  if (stored) return stored;
  const entered = window.prompt('Annotator token:') ?? '';
  window.localStorage.setItem('review_token', entered);
  return entered;
}

const root = document.getElementById('app');
if (root) {
  const app = new ReviewApp(new ReviewClient(getToken()), root);
  void app.start();
  const statsLink = document.getElementById('nav-stats');
  statsLink?.addEventListener('click', (event) => {
    event.preventDefault();
    void app.showStats();
  });
  const queueLink = document.getElementById('nav-queue');
  queueLink?.addEventListener('click', (event) => {
    event.preventDefault();
    void app.loadQueue();
  });
}
